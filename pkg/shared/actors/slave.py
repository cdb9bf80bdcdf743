from enum import Enum
from typing import Dict, List, Optional

from shared.crypto.dh import DhParams, check_share, dh_gen, dh_shared
from shared.crypto.envelope import Envelope, pk_encrypt
from shared.crypto.keys import Nonce, PublicKey, RandomSource, SymKey, gen_nonce, inc
from shared.crypto.symmetric import sym_decrypt, sym_encrypt
from shared.errors import (
    AuthFail,
    CounterMismatch,
    MalformedPacket,
    TamperProofSealed,
    WrongNetwork,
    WrongPhase,
)
from shared.messages.layouts import (
    join_plain,
    parse_counter,
    parse_dh_init,
    parse_value_counter,
    share_plain,
    single_plain,
    value_counter_plain,
)
from shared.messages.packets import (
    Challenge,
    ChallengeResponse,
    KeyDelivery,
    PDh1,
    PDh2,
    PDh3,
    PJoin,
)
from shared.messages.types import ConfigurationData, PrincipalId


class Phase(Enum):
    EMPTY = "EMPTY"
    PROVISIONED = "PROVISIONED"
    JOIN_SENT = "JOIN_SENT"
    CHALLENGED = "CHALLENGED"
    VERIFIED = "VERIFIED"
    KEYED = "KEYED"
    ABORTED = "ABORTED"


PHASE_ORDER: List[Phase] = [
    Phase.EMPTY,
    Phase.PROVISIONED,
    Phase.JOIN_SENT,
    Phase.CHALLENGED,
    Phase.VERIFIED,
    Phase.KEYED,
]


class TamperProofStore:
    """
    Device memory that only the owning slave reads. The steal-device action
    goes through read_sealed() and gets TamperProofSealed.
    """

    def __init__(self):
        self.p_authcomm: Optional[Envelope] = None
        self.cd: Optional[ConfigurationData] = None
        self.ems_pub: Optional[PublicKey] = None
        self.nonce_s: Optional[Nonce] = None
        self.rnd_s: Optional[Nonce] = None
        self.dh_secret: Optional[int] = None
        self.dh_params: Optional[DhParams] = None
        self.pending_key: Optional[SymKey] = None

    def read_sealed(self):
        raise TamperProofSealed("tamper-proof memory cannot be read out")

    def secrets(self) -> List[bytes]:
        values = [self.nonce_s, self.rnd_s, self.pending_key]
        return [value for value in values if value is not None]


class SlaveState:
    """
    Phases move forward along PHASE_ORDER. ABORTED ends a session; only an
    explicit restart_session() (operator re-provisioning) leaves it.
    """

    def __init__(self, slave_id: PrincipalId):
        self.id = slave_id
        self.phase = Phase.EMPTY
        self.store = TamperProofStore()
        self.session_key: Optional[SymKey] = None
        self.abort_reason: Optional[str] = None
        self.joins_sent = 0

    @property
    def cd(self) -> Optional[ConfigurationData]:
        return self.store.cd

    @property
    def nonce_s(self) -> Optional[Nonce]:
        return self.store.nonce_s

    @property
    def rnd_s(self) -> Optional[Nonce]:
        return self.store.rnd_s

    def provision(
        self, p_authcomm: Envelope, cd: ConfigurationData, ems_pub: PublicKey
    ):
        self.store.p_authcomm = p_authcomm
        self.store.cd = cd
        self.store.ems_pub = ems_pub
        self.phase = Phase.PROVISIONED

    def abort(self, reason: str):
        if self.phase != Phase.KEYED:
            self.phase = Phase.ABORTED
            self.abort_reason = reason

    def restart_session(self):
        """Drop all session secrets and go back to PROVISIONED"""
        if self.store.p_authcomm is None:
            raise WrongPhase(f"{self.id} was never provisioned")
        self.store.nonce_s = None
        self.store.rnd_s = None
        self.store.dh_secret = None
        self.store.dh_params = None
        self.store.pending_key = None
        self.session_key = None
        self.abort_reason = None
        self.phase = Phase.PROVISIONED

    def exposed_fields(self) -> Dict[str, object]:
        """What an adversary holding the physical device can read"""
        return {
            "id": str(self.id),
            "phase": self.phase.value,
            "joins_sent": self.joins_sent,
        }


def _require_phase(slave: SlaveState, expected: Phase):
    if slave.phase != expected:
        raise WrongPhase(
            f"{slave.id} is {slave.phase.value}, expected {expected.value}"
        )


def slave_build_pjoin(slave: SlaveState, rng: RandomSource) -> PJoin:
    _require_phase(slave, Phase.PROVISIONED)
    assert slave.store.p_authcomm is not None and slave.store.ems_pub is not None

    nonce_s = gen_nonce(rng)
    env = pk_encrypt(
        slave.store.ems_pub, join_plain(slave.store.p_authcomm, slave.id, nonce_s), rng
    )
    slave.store.nonce_s = nonce_s
    slave.joins_sent += 1
    slave.phase = Phase.JOIN_SENT
    return PJoin(env)


def slave_answer_challenge(
    slave: SlaveState, ch: Challenge, rng: RandomSource
) -> ChallengeResponse:
    _require_phase(slave, Phase.JOIN_SENT)
    nonce_s = slave.store.nonce_s
    assert nonce_s is not None

    # a verifier that cannot encrypt under NONCE_S never saw our PJoin
    try:
        challenger_nonce, counter = parse_value_counter(sym_decrypt(nonce_s, ch.ct))
    except (AuthFail, MalformedPacket):
        raise WrongNetwork(f"{slave.id} cannot open the challenge")
    if counter != inc(nonce_s, 1):
        raise WrongNetwork(f"{slave.id} got a challenge off the nonce schedule")

    rnd_s = gen_nonce(rng)
    ct = sym_encrypt(
        challenger_nonce, value_counter_plain(rnd_s, inc(nonce_s, 2)), rng
    )
    slave.store.rnd_s = rnd_s
    slave.phase = Phase.CHALLENGED
    return ChallengeResponse(ct)


def _open_under_rnd(slave: SlaveState, ct: bytes) -> bytes:
    assert slave.store.rnd_s is not None
    return sym_decrypt(slave.store.rnd_s, ct)


def _check_counter(slave: SlaveState, counter: bytes, step: int):
    assert slave.store.nonce_s is not None
    if counter != inc(slave.store.nonce_s, step):
        raise CounterMismatch(f"{slave.id} expected NONCE_S+{step}")


def slave_accept_key(slave: SlaveState, kd: KeyDelivery) -> SlaveState:
    _require_phase(slave, Phase.CHALLENGED)
    try:
        key, counter = parse_value_counter(_open_under_rnd(slave, kd.ct))
    except MalformedPacket as err:
        raise AuthFail(f"key delivery for {slave.id} is unreadable: {err}")
    _check_counter(slave, counter, 3)

    slave.session_key = SymKey(key)
    slave.phase = Phase.KEYED
    return slave


def slave_dh_respond(slave: SlaveState, p1: PDh1, rng: RandomSource) -> PDh2:
    _require_phase(slave, Phase.CHALLENGED)
    try:
        params, peer_share, counter = parse_dh_init(_open_under_rnd(slave, p1.ct))
    except MalformedPacket as err:
        raise AuthFail(f"DH init for {slave.id} is unreadable: {err}")
    _check_counter(slave, counter, 3)
    check_share(params, peer_share)

    nonce_s = slave.store.nonce_s
    rnd_s = slave.store.rnd_s
    assert nonce_s is not None and rnd_s is not None
    secret, share = dh_gen(params, rng)
    key = dh_shared(params, secret, peer_share)
    ct_nonce = sym_encrypt(key, single_plain(inc(nonce_s, 4)), rng)
    ct_share = sym_encrypt(rnd_s, share_plain(share), rng)

    slave.store.dh_secret = secret
    slave.store.dh_params = params
    slave.store.pending_key = key
    slave.phase = Phase.VERIFIED
    return PDh2(ct_nonce, ct_share)


def slave_dh_confirm(slave: SlaveState, p3: PDh3) -> SlaveState:
    _require_phase(slave, Phase.VERIFIED)
    key = slave.store.pending_key
    assert key is not None
    try:
        counter = parse_counter(sym_decrypt(key, p3.ct))
    except MalformedPacket as err:
        raise AuthFail(f"DH confirmation for {slave.id} is unreadable: {err}")
    _check_counter(slave, counter, 5)

    slave.session_key = key
    slave.phase = Phase.KEYED
    return slave
