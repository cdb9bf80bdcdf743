"""
God's-view lifting of concrete packets into Terms.

The simulation knows every key, so each packet can be opened layer by layer
and rewritten with symbolic atoms: a value the vault knows becomes its
label, a counter becomes inc(<nonce>, k), anything unknown becomes an
opaque atom. Packets that do not decode lift to a single opaque atom.
"""

import hashlib
from typing import Dict, List, Optional, Tuple

from shared.crypto.envelope import Envelope, pk_decrypt, psk_decrypt
from shared.crypto.keys import PrivateKey, PublicKey, nonce_offset
from shared.crypto.symmetric import sym_decrypt
from shared.errors import ProtocolError
from shared.knowledge.terms import (
    Atom,
    PkEnc,
    Sig,
    SymEnc,
    Term,
    increment,
    labeled,
    private_atom,
    private_of,
    public_atom,
    tuple_term,
)
from shared.messages.layouts import (
    parse_auth_comm,
    parse_auth_dev,
    parse_counter,
    parse_delegation,
    parse_dh_init,
    parse_join,
    parse_join_fwd,
    parse_share,
    parse_value_counter,
)
from shared.messages.packets import (
    Challenge,
    ChallengeResponse,
    Delegation,
    KeyDelivery,
    PAuthComm,
    PAuthDev,
    PDh1,
    PDh2,
    PDh3,
    PJoin,
    PJoinFwd,
    decode,
)
from shared.messages.types import ConfigurationData, EncApparam, PrincipalId

# counters ride at most this far above their base nonce
MAX_COUNTER_STEP = 8


def opaque(raw: bytes) -> Atom:
    return Atom(f"opaque[{hashlib.sha256(raw).hexdigest()[:16]}]")


def identity(principal: PrincipalId) -> Atom:
    return labeled("ID", principal.label())


def cd_atom(cd: ConfigurationData) -> Atom:
    return labeled("CD", cd.slave_id.label())


class SecretVault:
    """Every key and secret value of a run, each with its symbolic label"""

    def __init__(self):
        self.private_keys: List[Tuple[PublicKey, PrivateKey, str]] = []
        self.symmetric: Dict[bytes, Atom] = {}
        self.nonces: Dict[bytes, Atom] = {}
        self.aparams: Dict[bytes, Atom] = {}

    def add_keypair(self, pub: PublicKey, priv: PrivateKey, owner: PrincipalId):
        known = [entry[0].encryption for entry in self.private_keys]
        if pub.encryption not in known:
            self.private_keys.append((pub, priv, owner.label()))

    def add_symmetric(self, value: Optional[bytes], label: Atom):
        """Values that serve as keys: nonces, RND_S, session keys"""
        if value is not None and value not in self.symmetric:
            self.symmetric[value] = label

    def add_nonce(self, value: Optional[bytes], label: Atom):
        """NONCE_S values, the base every counter is expressed against"""
        if value is not None:
            self.nonces.setdefault(value, label)
            self.add_symmetric(value, label)

    def add_aparam(self, value: bytes, employee: PrincipalId):
        self.aparams[value] = labeled("APARAM", employee.label())

    def value_atom(self, value: bytes) -> Term:
        if value in self.symmetric:
            return self.symmetric[value]
        return opaque(value)

    def counter_term(self, value: bytes) -> Term:
        for base, label in self.nonces.items():
            if len(base) != len(value):
                continue
            step = nonce_offset(base, value)
            if 0 < step <= MAX_COUNTER_STEP:
                return increment(label, step)
        return self.value_atom(value)

    def open_envelope(self, env: Envelope) -> Optional[Tuple[Atom, bytes]]:
        for _, priv, owner in self.private_keys:
            try:
                return public_atom(owner), pk_decrypt(priv, env)
            except ProtocolError:
                continue
        return None

    def open_preshared(self, env: Envelope) -> Optional[Tuple[Atom, bytes]]:
        for value, label in self.symmetric.items():
            try:
                return label, psk_decrypt(value, env)
            except ProtocolError:
                continue
        return None

    def open_symmetric(self, ct: bytes) -> Optional[Tuple[Atom, bytes]]:
        for value, label in self.symmetric.items():
            try:
                return label, sym_decrypt(value, ct)
            except ProtocolError:
                continue
        return None


def _signature(signer: PrincipalId, signed: PrincipalId) -> Term:
    return Sig(private_atom(signer.label()), identity(signed))


class _Lifter:
    def __init__(self, vault: SecretVault, signers: Dict[str, PrincipalId]):
        self.vault = vault
        # role value -> principal, for naming signature owners
        self.signers = signers

    def enc_aparam(self, enc: EncApparam) -> Term:
        opened = self.vault.open_envelope(enc.env)
        if opened is None:
            return opaque(enc.encode())
        pub, secret = opened
        aparam = self.vault.aparams.get(secret, opaque(secret))
        inner = PkEnc(pub, aparam)
        return tuple_term([inner, Sig(private_of(pub), inner)])

    def auth_comm(self, env: Envelope) -> Term:
        opened = self.vault.open_envelope(env)
        if opened is None:
            return opaque(env.wrapped_key + env.body)
        pub, plain = opened
        cd, enc = parse_auth_comm(plain)
        return PkEnc(pub, tuple_term([cd_atom(cd), self.enc_aparam(enc)]))

    def join(self, pkt: PJoin) -> Term:
        opened = self.vault.open_envelope(pkt.env)
        if opened is None:
            return opaque(pkt.env.wrapped_key + pkt.env.body)
        pub, plain = opened
        p_authcomm, slave_id, nonce_s = parse_join(plain)
        body = tuple_term(
            [
                self.auth_comm(p_authcomm),
                identity(slave_id),
                self.vault.value_atom(nonce_s),
            ]
        )
        return PkEnc(pub, body)

    def join_fwd(self, pkt: PJoinFwd) -> Term:
        opened = self.vault.open_envelope(pkt.env)
        if opened is None:
            return opaque(pkt.env.wrapped_key + pkt.env.body)
        pub, plain = opened
        pjoin_raw, master_id, _ = parse_join_fwd(plain)
        inner = decode(pjoin_raw)
        if isinstance(inner, PJoin):
            inner_term = self.join(inner)
        else:
            inner_term = opaque(pjoin_raw)
        return PkEnc(
            pub,
            tuple_term(
                [inner_term, identity(master_id), _signature(master_id, master_id)]
            ),
        )

    def auth_dev(self, pkt: PAuthDev) -> Term:
        opened = self.vault.open_envelope(pkt.env)
        if opened is None:
            return opaque(pkt.env.wrapped_key + pkt.env.body)
        pub, plain = opened
        cd, nonce_s, _ = parse_auth_dev(plain)
        ems = self.signers["EMS"]
        return PkEnc(
            pub,
            tuple_term(
                [cd_atom(cd), self.vault.value_atom(nonce_s), _signature(ems, ems)]
            ),
        )

    def delegation(self, pkt: Delegation) -> Term:
        sm = self.signers["SM"]
        opened = self.vault.open_envelope(pkt.env)
        if opened is not None:
            pub, plain = opened
            nonce_s, _, cd = parse_delegation(plain)
            body = tuple_term(
                [self.vault.value_atom(nonce_s), _signature(sm, sm), cd_atom(cd)]
            )
            return PkEnc(pub, body)
        shared = self.vault.open_preshared(pkt.env)
        if shared is None:
            return opaque(pkt.env.wrapped_key + pkt.env.body)
        key, plain = shared
        nonce_s, _, cd = parse_delegation(plain)
        body = tuple_term(
            [self.vault.value_atom(nonce_s), _signature(sm, sm), cd_atom(cd)]
        )
        return SymEnc(key, body)

    def value_counter(self, ct: bytes) -> Term:
        opened = self.vault.open_symmetric(ct)
        if opened is None:
            return opaque(ct)
        key, plain = opened
        value, counter = parse_value_counter(plain)
        return SymEnc(
            key,
            tuple_term(
                [self.vault.value_atom(value), self.vault.counter_term(counter)]
            ),
        )

    def dh_init(self, ct: bytes) -> Term:
        opened = self.vault.open_symmetric(ct)
        if opened is None:
            return opaque(ct)
        key, plain = opened
        params, share, counter = parse_dh_init(plain)
        return SymEnc(
            key,
            tuple_term(
                [
                    Atom(f"dh[{params.p:x}]"),
                    Atom(f"dh[{params.g:x}]"),
                    Atom(f"dh[{share:x}]"),
                    self.vault.counter_term(counter),
                ]
            ),
        )

    def counter_only(self, ct: bytes) -> Term:
        opened = self.vault.open_symmetric(ct)
        if opened is None:
            return opaque(ct)
        key, plain = opened
        return SymEnc(key, self.vault.counter_term(parse_counter(plain)))

    def share(self, ct: bytes) -> Term:
        opened = self.vault.open_symmetric(ct)
        if opened is None:
            return opaque(ct)
        key, plain = opened
        return SymEnc(key, Atom(f"dh[{parse_share(plain):x}]"))


def lift_packet(
    raw: bytes, vault: SecretVault, signers: Dict[str, PrincipalId]
) -> Term:
    """signers maps "EMS" and "SM" to the principals whose signatures travel"""
    lifter = _Lifter(vault, signers)
    try:
        pkt = decode(raw)
        if isinstance(pkt, PAuthComm):
            return lifter.auth_comm(pkt.env)
        if isinstance(pkt, PJoin):
            return lifter.join(pkt)
        if isinstance(pkt, PJoinFwd):
            return lifter.join_fwd(pkt)
        if isinstance(pkt, PAuthDev):
            return lifter.auth_dev(pkt)
        if isinstance(pkt, Delegation):
            return lifter.delegation(pkt)
        if isinstance(pkt, (Challenge, ChallengeResponse, KeyDelivery)):
            return lifter.value_counter(pkt.ct)
        if isinstance(pkt, PDh1):
            return lifter.dh_init(pkt.ct)
        if isinstance(pkt, PDh2):
            return tuple_term(
                [lifter.counter_only(pkt.ct_nonce), lifter.share(pkt.ct_share)]
            )
        if isinstance(pkt, PDh3):
            return lifter.counter_only(pkt.ct)
    except (ProtocolError, ValueError, KeyError):
        pass
    return opaque(raw)


def lift_card(
    locked_payload: bytes,
    employee: PrincipalId,
    vault: SecretVault,
    enc: Optional[EncApparam],
) -> Term:
    """A stolen card: EncApparam under a key only the password yields"""
    card_key = labeled("CARD_KEY", employee.label())
    if enc is None:
        return SymEnc(card_key, opaque(locked_payload))
    return SymEnc(card_key, _Lifter(vault, {}).enc_aparam(enc))



def lift_device_dump(fields: Dict[str, object], vault: SecretVault) -> List[Term]:
    """Byte values read off a stolen device, as the atoms the vault knows them by"""
    terms: List[Term] = []
    for value in fields.values():
        if not isinstance(value, (bytes, bytearray)):
            continue
        raw = bytes(value)
        if raw in vault.aparams:
            terms.append(vault.aparams[raw])
        else:
            terms.append(vault.value_atom(raw))
    return terms
