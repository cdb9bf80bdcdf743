"""
Commissioning side of the protocol: employee ID cards and the handheld
that transfers the employee's trust into a new slave.
"""

import hmac
from typing import Optional

from cryptography.hazmat.primitives import hashes

from shared.actors.audit import AuditRecord, AuditStep, AuditTrail
from shared.actors.slave import Phase, SlaveState
from shared.constants import DEFAULT_KDF_ITERATIONS
from shared.crypto.envelope import pk_encrypt, verify
from shared.crypto.keys import PublicKey, RandomSource
from shared.crypto.symmetric import derive_card_key, sym_decrypt
from shared.errors import (
    AlreadyProvisioned,
    AuthFail,
    BadCardSignature,
    IntegrityError,
    MalformedPacket,
    WrongPassword,
)
from shared.messages.fields import pack_fields
from shared.messages.layouts import auth_comm_plain
from shared.messages.types import ConfigurationData, EncApparam, PrincipalId


def _digest(data: bytes) -> bytes:
    hasher = hashes.Hash(hashes.SHA256())
    hasher.update(data)
    return hasher.finalize()


class IdCard:
    """
    The locked payload is EncApparam under a password-derived key. The card
    also carries a digest of the locked bytes so that tampering with the
    stored payload is told apart from a wrong password.
    """

    def __init__(
        self,
        employee_id: PrincipalId,
        salt: bytes,
        locked_payload: bytes,
        kdf_iterations: int = DEFAULT_KDF_ITERATIONS,
        payload_digest: Optional[bytes] = None,
    ):
        self.employee_id = employee_id
        self.salt = salt
        self.locked_payload = locked_payload
        self.kdf_iterations = kdf_iterations
        self.payload_digest = (
            payload_digest if payload_digest is not None else _digest(locked_payload)
        )

    def encode(self) -> bytes:
        """Everything a thief holding the card can read"""
        return pack_fields(
            [
                self.employee_id.encode(),
                self.salt,
                self.locked_payload,
                self.payload_digest,
            ]
        )


def card_unlock(card: IdCard, password: bytes) -> EncApparam:
    if not hmac.compare_digest(_digest(card.locked_payload), card.payload_digest):
        raise IntegrityError(f"card of {card.employee_id} has been modified")

    key = derive_card_key(password, card.salt, card.kdf_iterations)
    try:
        payload = sym_decrypt(key, card.locked_payload)
    except AuthFail:
        raise WrongPassword(f"wrong password for card of {card.employee_id}")

    try:
        return EncApparam.decode(payload)
    except MalformedPacket:
        raise IntegrityError(f"card of {card.employee_id} holds an unreadable payload")


class HandheldState:
    """
    The commissioning device. The unlocked EncApparam only ever lives in
    `scratch`, which is wiped before hh_commission returns.
    """

    def __init__(self, hh_id: PrincipalId):
        self.id = hh_id
        self.scratch = bytearray()
        self.commissioned = 0

    def wipe(self):
        for i in range(len(self.scratch)):
            self.scratch[i] = 0
        self.scratch = bytearray()

    def serialize(self) -> bytes:
        return pack_fields(
            [self.id.encode(), bytes(self.scratch), str(self.commissioned).encode()]
        )


def hh_commission(
    hh: HandheldState,
    card: IdCard,
    password: bytes,
    cd: ConfigurationData,
    ems_pub: PublicKey,
    slave: SlaveState,
    rng: RandomSource,
    audit: Optional[AuditTrail] = None,
) -> AuditRecord:
    if slave.phase != Phase.EMPTY:
        raise AlreadyProvisioned(f"{slave.id} is already {slave.phase.value}")
    if cd.slave_id != slave.id:
        raise ValueError(f"CD is for {cd.slave_id}, not {slave.id}")

    try:
        enc_aparam = card_unlock(card, password)
        hh.scratch = bytearray(enc_aparam.encode())
        if not verify(ems_pub, enc_aparam.signed_bytes(), enc_aparam.ems_signature):
            raise BadCardSignature(
                f"ENC_APARAM on card of {card.employee_id} is not signed by the EMS"
            )
        p_authcomm = pk_encrypt(ems_pub, auth_comm_plain(cd, enc_aparam), rng)
    finally:
        hh.wipe()

    slave.provision(p_authcomm, cd, ems_pub)
    hh.commissioned += 1

    detail = f"commissioned by {hh.id} with card of {card.employee_id}"
    if audit is not None:
        return audit.record(
            slave.id, cd.employee_id, hh.id, AuditStep.PROVISIONED, detail
        )
    return AuditRecord(
        slave.id, cd.employee_id, hh.id, AuditStep.PROVISIONED, detail, 0
    )
