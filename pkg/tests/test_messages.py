import pytest

from shared.crypto.envelope import Envelope
from shared.crypto.keys import RandomSource
from shared.errors import MalformedPacket
from shared.messages.fields import pack_fields, unpack_fields
from shared.messages.layouts import parse_join, parse_value_counter, value_counter_plain
from shared.messages.packets import (
    ALL_PACKET_TYPES,
    Challenge,
    PDh2,
    PJoin,
    decode,
    encode,
)
from shared.messages.types import (
    MASTER_SETTING,
    Capability,
    ConfigurationData,
    PrincipalId,
    Role,
)


def test_packet_tags_are_unique():
    tags = [packet_type.TAG for packet_type in ALL_PACKET_TYPES]
    assert len(tags) == len(set(tags))


def test_encode_decode_keeps_variant(rng: RandomSource):
    pjoin = PJoin(Envelope(rng.bytes(60), rng.bytes(80)))
    challenge = Challenge(rng.bytes(60))
    dh2 = PDh2(rng.bytes(44), rng.bytes(40))

    assert decode(encode(pjoin)) == pjoin
    assert decode(encode(challenge)) == challenge
    assert decode(encode(dh2)) == dh2
    assert decode(encode(pjoin)).kind == "PJoin"


@pytest.mark.parametrize(
    "raw",
    [
        b"",
        b"\xff",
        b"\xff" + pack_fields([b"x"]),
    ],
)
def test_decode_rejects_unknown_or_empty(raw: bytes):
    with pytest.raises(MalformedPacket):
        decode(raw)


def test_decode_rejects_truncation_and_trailing_bytes(rng: RandomSource):
    raw = encode(Challenge(rng.bytes(40)))
    with pytest.raises(MalformedPacket):
        decode(raw[:-1])
    with pytest.raises(MalformedPacket):
        decode(raw + b"\x00")


def test_decode_rejects_wrong_field_count(rng: RandomSource):
    # PDh2 carries two fields
    raw = bytes([PDh2.TAG]) + pack_fields([rng.bytes(20)])
    with pytest.raises(MalformedPacket):
        decode(raw)


def test_unpack_fields_is_strict():
    packed = pack_fields([b"one", b"", b"three"])
    assert unpack_fields(packed) == [b"one", b"", b"three"]
    assert unpack_fields(packed, 3) == [b"one", b"", b"three"]
    with pytest.raises(MalformedPacket):
        unpack_fields(packed, 2)
    with pytest.raises(MalformedPacket):
        unpack_fields(packed[:5])


def test_configuration_data_encoding():
    cd = ConfigurationData(
        PrincipalId(Role.SLAVE, "s1"),
        PrincipalId(Role.EMPLOYEE, "alice"),
        PrincipalId(Role.HH, "hh1"),
        Capability.ASYM_CAPABLE,
        [(MASTER_SETTING, "m1"), ("line", "3")],
    )
    decoded = ConfigurationData.decode(cd.encode())

    assert decoded == cd
    assert decoded.master_name() == "m1"
    assert decoded.is_hierarchical()
    assert decoded.get_setting("line") == "3"


def test_configuration_data_needs_employee_role():
    with pytest.raises(ValueError):
        ConfigurationData(
            PrincipalId(Role.SLAVE, "s1"),
            PrincipalId(Role.HH, "hh1"),
            None,
            Capability.SYM_ONLY,
            [],
        )


def test_principal_decode_rejects_unknown_role():
    raw = pack_fields([b"WIZARD", b"merlin"])
    with pytest.raises(MalformedPacket):
        PrincipalId.decode(raw)


def test_layouts_check_sizes(rng: RandomSource):
    plain = value_counter_plain(rng.bytes(16), rng.bytes(16))
    value, counter = parse_value_counter(plain)
    assert len(value) == len(counter) == 16
    with pytest.raises(MalformedPacket):
        parse_value_counter(value_counter_plain(rng.bytes(16), rng.bytes(15)))
    with pytest.raises(MalformedPacket):
        parse_join(pack_fields([b"not a packet", b"", b""]))
