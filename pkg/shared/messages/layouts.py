"""
Plaintext layouts inside each encryption layer, left to right as the
protocol tuples are written. Every layout is a pack_fields list.
"""

from typing import Tuple

from shared.constants import NONCE_SIZE, SYM_KEY_SIZE
from shared.crypto.dh import DhParams
from shared.crypto.envelope import Envelope
from shared.errors import MalformedPacket
from shared.messages.fields import (
    bytes_to_int,
    int_to_bytes,
    pack_fields,
    unpack_fields,
)
from shared.messages.packets import PAuthComm, PJoin, decode, encode
from shared.messages.types import (
    ConfigurationData,
    EncApparam,
    PrincipalId,
)


def _check_size(value: bytes, size: int, label: str) -> bytes:
    if len(value) != size:
        raise MalformedPacket(f"{label} must be {size} bytes, got {len(value)}")
    return value


# (CD, ENC_APARAM)
def auth_comm_plain(cd: ConfigurationData, enc_aparam: EncApparam) -> bytes:
    return pack_fields([cd.encode(), enc_aparam.encode()])


def parse_auth_comm(data: bytes) -> Tuple[ConfigurationData, EncApparam]:
    cd_raw, enc_raw = unpack_fields(data, 2)
    return ConfigurationData.decode(cd_raw), EncApparam.decode(enc_raw)


# (P_authComm, S_ID, NONCE_S)
def join_plain(p_authcomm: Envelope, slave_id: PrincipalId, nonce_s: bytes) -> bytes:
    return pack_fields([encode(PAuthComm(p_authcomm)), slave_id.encode(), nonce_s])


def parse_join(data: bytes) -> Tuple[Envelope, PrincipalId, bytes]:
    authcomm_raw, slave_raw, nonce_s = unpack_fields(data, 3)
    packet = decode(authcomm_raw)
    if not isinstance(packet, PAuthComm):
        raise MalformedPacket(f"expected PAuthComm inside PJoin, got {packet.kind}")
    return (
        packet.env,
        PrincipalId.decode(slave_raw),
        _check_size(nonce_s, NONCE_SIZE, "NONCE_S"),
    )


# (P_join, M_ID, sign(M_ID))
def join_fwd_plain(pjoin: PJoin, master_id: PrincipalId, signature: bytes) -> bytes:
    return pack_fields([encode(pjoin), master_id.encode(), signature])


def parse_join_fwd(data: bytes) -> Tuple[bytes, PrincipalId, bytes]:
    pjoin_raw, master_raw, signature = unpack_fields(data, 3)
    return pjoin_raw, PrincipalId.decode(master_raw), signature


# (CD, NONCE_S, sign(EMS_ID))
def auth_dev_plain(cd: ConfigurationData, nonce_s: bytes, signature: bytes) -> bytes:
    return pack_fields([cd.encode(), nonce_s, signature])


def parse_auth_dev(data: bytes) -> Tuple[ConfigurationData, bytes, bytes]:
    cd_raw, nonce_s, signature = unpack_fields(data, 3)
    return (
        ConfigurationData.decode(cd_raw),
        _check_size(nonce_s, NONCE_SIZE, "NONCE_S"),
        signature,
    )


# (NONCE_S, sign(SM_ID), CD)
def delegation_plain(
    nonce_s: bytes, signature: bytes, cd: ConfigurationData
) -> bytes:
    return pack_fields([nonce_s, signature, cd.encode()])


def parse_delegation(data: bytes) -> Tuple[bytes, bytes, ConfigurationData]:
    nonce_s, signature, cd_raw = unpack_fields(data, 3)
    return (
        _check_size(nonce_s, NONCE_SIZE, "NONCE_S"),
        signature,
        ConfigurationData.decode(cd_raw),
    )


# (value, counter) for Challenge, ChallengeResponse and KeyDelivery
def value_counter_plain(value: bytes, counter: bytes) -> bytes:
    return pack_fields([value, counter])


def parse_value_counter(data: bytes) -> Tuple[bytes, bytes]:
    value, counter = unpack_fields(data, 2)
    return (
        _check_size(value, SYM_KEY_SIZE, "value"),
        _check_size(counter, NONCE_SIZE, "counter"),
    )


# (p, g, A, counter)
def dh_init_plain(params: DhParams, share: int, counter: bytes) -> bytes:
    return pack_fields(
        [int_to_bytes(params.p), int_to_bytes(params.g), int_to_bytes(share), counter]
    )


def parse_dh_init(data: bytes) -> Tuple[DhParams, int, bytes]:
    p_raw, g_raw, share_raw, counter = unpack_fields(data, 4)
    try:
        params = DhParams(bytes_to_int(p_raw), bytes_to_int(g_raw))
    except ValueError as err:
        raise MalformedPacket(f"invalid DH parameters: {err}")
    return params, bytes_to_int(share_raw), _check_size(counter, NONCE_SIZE, "counter")


def single_plain(value: bytes) -> bytes:
    return pack_fields([value])


def parse_single(data: bytes) -> bytes:
    (value,) = unpack_fields(data, 1)
    return value


def share_plain(share: int) -> bytes:
    return single_plain(int_to_bytes(share))


def parse_share(data: bytes) -> int:
    return bytes_to_int(parse_single(data))


def parse_counter(data: bytes) -> bytes:
    return _check_size(parse_single(data), NONCE_SIZE, "counter")

