"""
The verifying side of authenticity verification and key establishment.

Both the security manager (direct topology) and a trusted master
(hierarchical topology) challenge a slave, check its response and then
hand out or negotiate its session key, so that logic lives in Verifier.
"""

from enum import Enum
from typing import Dict, Optional, Tuple, Union

from shared.actors.audit import AuditStep, AuditTrail
from shared.actors.slave import Phase as SlavePhase
from shared.actors.slave import SlaveState
from shared.crypto.dh import DhParams, dh_gen, dh_shared
from shared.crypto.envelope import (
    pk_decrypt,
    pk_encrypt,
    psk_decrypt,
    psk_encrypt,
    sign,
    verify,
)
from shared.crypto.keys import (
    KeyPair,
    Nonce,
    PublicKey,
    RandomSource,
    SymKey,
    gen_nonce,
    gen_symkey,
    inc,
)
from shared.crypto.symmetric import sym_decrypt, sym_encrypt
from shared.errors import (
    AuthFail,
    BadEmsSignature,
    BadSmSignature,
    CounterMismatch,
    MalformedPacket,
    MasterNotTrusted,
    NotVerified,
    ProtocolError,
    ReplayDetected,
    UnexpectedPacket,
    UnknownMaster,
    UnknownSession,
    WrongCapability,
    WrongPhase,
)
from shared.messages.layouts import (
    delegation_plain,
    dh_init_plain,
    join_fwd_plain,
    parse_auth_dev,
    parse_counter,
    parse_delegation,
    parse_share,
    parse_value_counter,
    single_plain,
    value_counter_plain,
)
from shared.messages.packets import (
    Challenge,
    ChallengeResponse,
    Delegation,
    KeyDelivery,
    PAuthDev,
    PDh1,
    PDh2,
    PDh3,
    PJoin,
    PJoinFwd,
)
from shared.messages.types import Capability, ConfigurationData, PrincipalId, Role


class DelegationMode(Enum):
    PUBLIC_KEY = "public_key"
    PRESHARED = "preshared"


class KeySource(Enum):
    MASTER = "master"
    SM = "sm"


class SessionPhase(Enum):
    DELEGATED = "DELEGATED"
    CHALLENGED = "CHALLENGED"
    VERIFIED = "VERIFIED"
    DH_SENT = "DH_SENT"
    KEYED = "KEYED"
    ABORTED = "ABORTED"


class PendingSession:
    def __init__(
        self,
        cd: ConfigurationData,
        nonce_s: Nonce,
        challenger_nonce: Optional[Nonce],
        phase: SessionPhase,
    ):
        self.cd = cd
        self.nonce_s = nonce_s
        self.challenger_nonce = challenger_nonce
        self.rnd_s: Optional[Nonce] = None
        self.phase = phase
        self.dh_params: Optional[DhParams] = None
        self.dh_secret: Optional[int] = None
        self.abort_reason: Optional[str] = None


class Verifier:
    def __init__(self, verifier_id: PrincipalId, keypair: KeyPair, audit: AuditTrail):
        self.id = verifier_id
        self.keypair = keypair
        self.audit = audit
        self.pending: Dict[PrincipalId, PendingSession] = {}
        self.issued_keys: Dict[PrincipalId, SymKey] = {}

    def session(self, slave_id: PrincipalId) -> PendingSession:
        session = self.pending.get(slave_id)
        if session is None:
            raise UnknownSession(f"{self.id} has no session with {slave_id}")
        return session

    def abort(self, slave_id: PrincipalId, reason: str):
        session = self.pending.get(slave_id)
        if session is not None and session.phase != SessionPhase.KEYED:
            session.phase = SessionPhase.ABORTED
            session.abort_reason = reason

    def record_step(
        self,
        session: Optional[PendingSession],
        slave_id: Optional[PrincipalId],
        step: AuditStep,
        detail: str,
    ):
        cd = session.cd if session else None
        self.audit.record(
            slave_id,
            cd.employee_id if cd else None,
            cd.handheld_id if cd else None,
            step,
            detail,
        )


def _new_challenge(
    cd: ConfigurationData, nonce_s: Nonce, rng: RandomSource
) -> Tuple[Challenge, PendingSession]:
    challenger_nonce = gen_nonce(rng)
    plain = value_counter_plain(challenger_nonce, inc(nonce_s, 1))
    ct = sym_encrypt(nonce_s, plain, rng)
    return Challenge(ct), PendingSession(
        cd, nonce_s, challenger_nonce, SessionPhase.CHALLENGED
    )


class SmState(Verifier):
    def __init__(
        self,
        sm_id: PrincipalId,
        keypair: KeyPair,
        ems_id: PrincipalId,
        ems_pub: PublicKey,
        audit: AuditTrail,
    ):
        Verifier.__init__(self, sm_id, keypair, audit)
        self.ems_id = ems_id
        self.ems_pub = ems_pub
        self.known_masters: Dict[PrincipalId, PublicKey] = {}
        self.master_keys: Dict[PrincipalId, SymKey] = {}
        self.delegation_modes: Dict[PrincipalId, DelegationMode] = {}

    def register_master(
        self,
        master_id: PrincipalId,
        master_pub: PublicKey,
        delegation_key: Optional[SymKey],
        mode: DelegationMode,
    ):
        self.known_masters[master_id] = master_pub
        if delegation_key is not None:
            self.master_keys[master_id] = delegation_key
        self.delegation_modes[master_id] = mode

    def grant_delegated_key(
        self,
        master_id: PrincipalId,
        slave_id: PrincipalId,
        master_session: PendingSession,
        rng: RandomSource,
    ) -> SymKey:
        """
        SM-generated session key for a slave verified by master_id, handed
        over the trusted SM-master link rather than the bus. master_session
        is the master's own record of that slave and must be VERIFIED.
        """
        session = self.session(slave_id)
        if session.phase != SessionPhase.DELEGATED:
            raise WrongPhase(f"{slave_id} was not delegated by {self.id}")
        if session.cd.master_name() != master_id.name:
            raise UnknownMaster(f"{slave_id} was delegated to another master")
        if master_session.cd.slave_id != slave_id:
            raise UnknownSession(f"{master_id} passed the session of another slave")
        if master_session.phase != SessionPhase.VERIFIED:
            raise WrongPhase(
                f"{master_id} has not verified {slave_id}, "
                f"its session is {master_session.phase.value}"
            )

        key = gen_symkey(rng)
        self.issued_keys[slave_id] = key
        session.phase = SessionPhase.KEYED
        return key


def _same_join(verifier: Verifier, slave_id: PrincipalId, nonce_s: bytes) -> bool:
    session = verifier.pending.get(slave_id)
    return session is not None and session.nonce_s == nonce_s


def _delegate(
    sm: SmState, cd: ConfigurationData, nonce_s: Nonce, rng: RandomSource
) -> Delegation:
    master_name = cd.master_name()
    assert master_name is not None
    master_id = PrincipalId(Role.MASTER, master_name)
    mode = sm.delegation_modes.get(master_id)
    if mode is None:
        raise UnknownMaster(f"{sm.id} has no key material for {master_id}")

    plain = delegation_plain(nonce_s, sign(sm.keypair.private, sm.id.encode()), cd)
    if mode == DelegationMode.PUBLIC_KEY:
        return Delegation(pk_encrypt(sm.known_masters[master_id], plain, rng))
    psk = sm.master_keys.get(master_id)
    if psk is None:
        raise UnknownMaster(f"{sm.id} shares no delegation key with {master_id}")
    return Delegation(psk_encrypt(psk, plain, rng))


def sm_begin_verification(
    sm: SmState, pauthdev: PAuthDev, rng: RandomSource
) -> Tuple[PrincipalId, Union[Challenge, Delegation]]:
    """
    Returns the joining slave with a Challenge for direct CDs, or with a
    Delegation for its master for hierarchical ones.
    """
    try:
        plain = pk_decrypt(sm.keypair.private, pauthdev.env)
        cd, nonce_s, signature = parse_auth_dev(plain)
    except ProtocolError as err:
        sm.record_step(None, None, AuditStep.REJECTED, f"{err.reason}: {err}")
        raise
    rejection: Optional[ProtocolError] = None
    if not verify(sm.ems_pub, sm.ems_id.encode(), signature):
        rejection = BadEmsSignature(
            f"PAuthDev for {cd.slave_id} is not from {sm.ems_id}"
        )
    elif _same_join(sm, cd.slave_id, nonce_s):
        rejection = ReplayDetected(f"verification of {cd.slave_id} already started")
    if rejection is not None:
        sm.audit.record(
            cd.slave_id,
            cd.employee_id,
            cd.handheld_id,
            AuditStep.REJECTED,
            f"{rejection.reason}: {rejection}",
        )
        raise rejection

    if cd.is_hierarchical():
        delegation = _delegate(sm, cd, Nonce(nonce_s), rng)
        sm.pending[cd.slave_id] = PendingSession(
            cd, Nonce(nonce_s), None, SessionPhase.DELEGATED
        )
        return cd.slave_id, delegation

    challenge, session = _new_challenge(cd, Nonce(nonce_s), rng)
    sm.pending[cd.slave_id] = session
    return cd.slave_id, challenge


class MasterState(Verifier):
    """
    A Level 1 device. It enrolls like any slave through its own `device`
    state and is only trusted once that enrollment reached KEYED.
    """

    def __init__(
        self,
        master_id: PrincipalId,
        keypair: KeyPair,
        device: SlaveState,
        sm_id: PrincipalId,
        sm_pub: PublicKey,
        audit: AuditTrail,
        delegation_mode: DelegationMode = DelegationMode.PUBLIC_KEY,
        key_source: KeySource = KeySource.MASTER,
    ):
        Verifier.__init__(self, master_id, keypair, audit)
        self.device = device
        self.sm_id = sm_id
        self.sm_pub = sm_pub
        self.delegation_mode = delegation_mode
        self.key_source = key_source
        self.forwarded = 0

    @property
    def trusted(self) -> bool:
        return self.device.phase == SlavePhase.KEYED

    @property
    def delegation_key(self) -> Optional[SymKey]:
        return self.device.session_key


def master_forward(master: MasterState, pjoin: PJoin, rng: RandomSource) -> PJoinFwd:
    if not master.trusted:
        raise MasterNotTrusted(f"{master.id} has not completed its own enrollment")
    ems_pub = master.device.store.ems_pub
    assert ems_pub is not None

    signature = sign(master.keypair.private, master.id.encode())
    env = pk_encrypt(ems_pub, join_fwd_plain(pjoin, master.id, signature), rng)
    master.forwarded += 1
    return PJoinFwd(env)


def _open_delegation(
    master: MasterState, delegation: Delegation
) -> Tuple[bytes, bytes, ConfigurationData]:
    if master.delegation_mode == DelegationMode.PUBLIC_KEY:
        plain = pk_decrypt(master.keypair.private, delegation.env)
    else:
        if master.delegation_key is None:
            raise MasterNotTrusted(f"{master.id} shares no key with {master.sm_id}")
        plain = psk_decrypt(master.delegation_key, delegation.env)
    try:
        return parse_delegation(plain)
    except MalformedPacket as err:
        raise AuthFail(f"delegation for {master.id} is unreadable: {err}")


def master_challenge(
    master: MasterState, delegation: Delegation, rng: RandomSource
) -> Tuple[PrincipalId, Challenge]:
    cd: Optional[ConfigurationData] = None
    try:
        nonce_s, signature, cd = _open_delegation(master, delegation)
        if not verify(master.sm_pub, master.sm_id.encode(), signature):
            raise BadSmSignature(f"delegation is not signed by {master.sm_id}")
        if cd.master_name() != master.id.name:
            raise UnexpectedPacket(
                f"delegation for {cd.slave_id} names another master"
            )
        if _same_join(master, cd.slave_id, nonce_s):
            raise ReplayDetected(f"delegation for {cd.slave_id} was already handled")
    except ProtocolError as err:
        master.audit.record(
            cd.slave_id if cd else None,
            cd.employee_id if cd else None,
            cd.handheld_id if cd else None,
            AuditStep.REJECTED,
            f"{err.reason}: {err}",
        )
        raise

    assert cd is not None
    challenge, session = _new_challenge(cd, Nonce(nonce_s), rng)
    master.pending[cd.slave_id] = session
    return cd.slave_id, challenge


def verifier_check_response(
    verifier: Verifier, slave_id: PrincipalId, resp: ChallengeResponse
) -> Tuple[bool, Nonce]:
    session = verifier.pending.get(slave_id)
    try:
        if session is None:
            raise UnknownSession(f"{verifier.id} never challenged {slave_id}")
        if session.phase != SessionPhase.CHALLENGED:
            raise WrongPhase(f"session with {slave_id} is {session.phase.value}")
        assert session.challenger_nonce is not None
        try:
            rnd_s, counter = parse_value_counter(
                sym_decrypt(session.challenger_nonce, resp.ct)
            )
        except MalformedPacket as err:
            raise AuthFail(f"response of {slave_id} is unreadable: {err}")
        if counter != inc(session.nonce_s, 2):
            raise CounterMismatch(f"response of {slave_id} is not at NONCE_S+2")
    except ProtocolError as err:
        verifier.record_step(
            session, slave_id, AuditStep.REJECTED, f"{err.reason}: {err}"
        )
        raise

    assert session is not None
    session.rnd_s = Nonce(rnd_s)
    session.phase = SessionPhase.VERIFIED
    verifier.record_step(
        session, slave_id, AuditStep.VERIFIED, f"RND_S received by {verifier.id}"
    )
    return True, session.rnd_s


def _verified_session(
    verifier: Verifier, slave_id: PrincipalId, capability: Capability
) -> PendingSession:
    session = verifier.pending.get(slave_id)
    if session is None or session.phase != SessionPhase.VERIFIED:
        raise NotVerified(f"{slave_id} has not been verified by {verifier.id}")
    if session.cd.capability != capability:
        raise WrongCapability(
            f"{slave_id} is {session.cd.capability.value}, needs {capability.value}"
        )
    return session


def issue_symmetric_key(
    verifier: Verifier,
    slave_id: PrincipalId,
    rng: RandomSource,
    supplied_key: Optional[SymKey] = None,
) -> KeyDelivery:
    """supplied_key carries an SM-granted key when a master delivers it"""
    session = _verified_session(verifier, slave_id, Capability.SYM_ONLY)
    assert session.rnd_s is not None

    key = supplied_key if supplied_key is not None else gen_symkey(rng)
    plain = value_counter_plain(key, inc(session.nonce_s, 3))
    ct = sym_encrypt(session.rnd_s, plain, rng)
    verifier.issued_keys[slave_id] = key
    session.phase = SessionPhase.KEYED
    verifier.record_step(
        session, slave_id, AuditStep.KEY_ISSUED, f"symmetric key from {verifier.id}"
    )
    return KeyDelivery(ct)


def sm_dh_init(
    verifier: Verifier, slave_id: PrincipalId, params: DhParams, rng: RandomSource
) -> PDh1:
    session = _verified_session(verifier, slave_id, Capability.ASYM_CAPABLE)
    assert session.rnd_s is not None

    secret, share = dh_gen(params, rng)
    ct = sym_encrypt(
        session.rnd_s, dh_init_plain(params, share, inc(session.nonce_s, 3)), rng
    )
    session.dh_params = params
    session.dh_secret = secret
    session.phase = SessionPhase.DH_SENT
    return PDh1(ct)


def _dh_confirmed_key(
    session: PendingSession, slave_id: PrincipalId, p2: PDh2
) -> SymKey:
    if session.phase != SessionPhase.DH_SENT:
        raise WrongPhase(f"no DH exchange open with {slave_id}")
    assert session.rnd_s is not None
    assert session.dh_params is not None and session.dh_secret is not None

    try:
        peer_share = parse_share(sym_decrypt(session.rnd_s, p2.ct_share))
        key = dh_shared(session.dh_params, session.dh_secret, peer_share)
        # key confirmation: the slave proves it derived the same K_S
        counter = parse_counter(sym_decrypt(key, p2.ct_nonce))
    except MalformedPacket as err:
        raise AuthFail(f"DH reply of {slave_id} is unreadable: {err}")
    if counter != inc(session.nonce_s, 4):
        raise CounterMismatch(f"DH reply of {slave_id} is not at NONCE_S+4")
    return key


def sm_dh_finish(
    verifier: Verifier, slave_id: PrincipalId, p2: PDh2, rng: RandomSource
) -> PDh3:
    session = verifier.pending.get(slave_id)
    try:
        if session is None:
            raise UnknownSession(f"{verifier.id} never challenged {slave_id}")
        key = _dh_confirmed_key(session, slave_id, p2)
    except ProtocolError as err:
        verifier.record_step(
            session, slave_id, AuditStep.REJECTED, f"{err.reason}: {err}"
        )
        raise

    assert session is not None
    ct = sym_encrypt(key, single_plain(inc(session.nonce_s, 5)), rng)
    verifier.issued_keys[slave_id] = key
    session.phase = SessionPhase.KEYED
    verifier.record_step(
        session, slave_id, AuditStep.KEY_ISSUED, f"DH key agreed with {verifier.id}"
    )
    return PDh3(ct)
