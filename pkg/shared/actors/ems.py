import hmac
from typing import Dict, Optional, Set, Tuple, Union

from shared.actors.audit import AuditStep, AuditTrail
from shared.actors.card import IdCard
from shared.constants import APARAM_SIZE, DEFAULT_KDF_ITERATIONS, SALT_SIZE
from shared.crypto.envelope import pk_decrypt, pk_encrypt, sign, verify
from shared.crypto.keys import KeyPair, PublicKey, RandomSource
from shared.crypto.symmetric import derive_card_key, sym_encrypt
from shared.errors import (
    AparamMismatch,
    BadMasterSignature,
    DuplicateEmployee,
    EmptyPassword,
    IntegrityError,
    MalformedPacket,
    ProtocolError,
    ReplayDetected,
    UnknownEmployee,
    UnknownMaster,
)
from shared.messages.layouts import (
    auth_dev_plain,
    parse_auth_comm,
    parse_join,
    parse_join_fwd,
)
from shared.messages.packets import PAuthDev, PJoin, PJoinFwd, decode
from shared.messages.types import (
    Aparam,
    ConfigurationData,
    EncApparam,
    PrincipalId,
    encode_envelope,
)


class EmsState:
    def __init__(
        self,
        ems_id: PrincipalId,
        keypair: KeyPair,
        sm_pub: PublicKey,
        audit: AuditTrail,
        kdf_iterations: int = DEFAULT_KDF_ITERATIONS,
    ):
        self.id = ems_id
        self.keypair = keypair
        self.sm_pub = sm_pub
        self.audit = audit
        self.kdf_iterations = kdf_iterations
        self.registry: Dict[PrincipalId, Aparam] = {}
        self.seen_joins: Set[Tuple[PrincipalId, bytes]] = set()
        self.known_masters: Dict[PrincipalId, PublicKey] = {}

    def register_master(self, master_id: PrincipalId, master_pub: PublicKey):
        self.known_masters[master_id] = master_pub


def ems_register_employee(
    ems: EmsState, employee_id: PrincipalId, password: bytes, rng: RandomSource
) -> IdCard:
    if employee_id in ems.registry:
        raise DuplicateEmployee(f"{employee_id} is already registered")

    if not password:
        raise EmptyPassword(f"{employee_id} needs a non-empty card password")
    salt = rng.bytes(SALT_SIZE)
    card_key = derive_card_key(password, salt, ems.kdf_iterations)

    aparam = Aparam(rng.bytes(APARAM_SIZE))
    env = pk_encrypt(ems.keypair.public, aparam.secret, rng)
    enc_aparam = EncApparam(env, sign(ems.keypair.private, encode_envelope(env)))
    locked = sym_encrypt(card_key, enc_aparam.encode(), rng)

    ems.registry[employee_id] = aparam
    return IdCard(employee_id, salt, locked, ems.kdf_iterations)


class _JoinContext:
    """What is known about a join so far, for the REJECTED audit row"""

    def __init__(self):
        self.slave_id: Optional[PrincipalId] = None
        self.cd: Optional[ConfigurationData] = None


def _unwrap_forward(ems: EmsState, pkt: PJoinFwd) -> Tuple[PJoin, PrincipalId]:
    pjoin_raw, master_id, signature = parse_join_fwd(
        pk_decrypt(ems.keypair.private, pkt.env)
    )
    master_pub = ems.known_masters.get(master_id)
    if master_pub is None:
        raise UnknownMaster(f"{master_id} is not a trusted master")
    if not verify(master_pub, master_id.encode(), signature):
        raise BadMasterSignature(f"forward signature does not verify for {master_id}")

    inner = decode(pjoin_raw)
    if not isinstance(inner, PJoin):
        raise MalformedPacket(f"PJoinFwd carries {inner.kind}, expected PJoin")
    return inner, master_id


def _authenticate(
    ems: EmsState,
    pkt: Union[PJoin, PJoinFwd],
    context: _JoinContext,
    rng: RandomSource,
) -> PAuthDev:
    forwarded_by: Optional[PrincipalId] = None
    if isinstance(pkt, PJoinFwd):
        pjoin, forwarded_by = _unwrap_forward(ems, pkt)
    else:
        pjoin = pkt

    p_authcomm, slave_id, nonce_s = parse_join(
        pk_decrypt(ems.keypair.private, pjoin.env)
    )
    context.slave_id = slave_id
    cd, enc_aparam = parse_auth_comm(pk_decrypt(ems.keypair.private, p_authcomm))
    context.cd = cd

    if cd.slave_id != slave_id:
        raise IntegrityError(f"P_authComm was commissioned for {cd.slave_id}")
    if forwarded_by is not None and cd.master_name() != forwarded_by.name:
        raise UnknownMaster(f"{forwarded_by} is not the master named in the CD")

    expected = ems.registry.get(cd.employee_id)
    if expected is None:
        raise UnknownEmployee(f"{cd.employee_id} is not registered")
    presented = pk_decrypt(ems.keypair.private, enc_aparam.env)
    if not hmac.compare_digest(presented, expected.secret):
        raise AparamMismatch(f"APARAM does not match {cd.employee_id}")

    if (slave_id, nonce_s) in ems.seen_joins:
        raise ReplayDetected(f"join of {slave_id} was already accepted")
    ems.seen_joins.add((slave_id, nonce_s))

    signature = sign(ems.keypair.private, ems.id.encode())
    return PAuthDev(pk_encrypt(ems.sm_pub, auth_dev_plain(cd, nonce_s, signature), rng))


def ems_process_join(
    ems: EmsState, pkt: Union[PJoin, PJoinFwd], rng: RandomSource
) -> PAuthDev:
    context = _JoinContext()
    try:
        pauthdev = _authenticate(ems, pkt, context, rng)
    except ProtocolError as err:
        ems.audit.record(
            context.slave_id,
            context.cd.employee_id if context.cd else None,
            context.cd.handheld_id if context.cd else None,
            AuditStep.REJECTED,
            f"{err.reason}: {err}",
        )
        raise

    assert context.cd is not None
    ems.audit.record(
        context.slave_id,
        context.cd.employee_id,
        context.cd.handheld_id,
        AuditStep.AUTHENTICATED,
        f"APARAM of {context.cd.employee_id} verified via {pkt.kind}",
    )
    return pauthdev
