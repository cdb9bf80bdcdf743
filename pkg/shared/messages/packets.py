"""
The closed set of on-wire packets and their codec.

Wire format: one tag byte (0x01-0x0B) followed by the variant's fields,
each length-prefixed (4 bytes big-endian), in declaration order. Decoding
is strict: unknown tags, wrong field counts, truncation and trailing bytes
are all MalformedPacket.
"""

from typing import Dict, List, Type

from shared.crypto.envelope import Envelope
from shared.errors import MalformedPacket
from shared.messages.fields import pack_fields, unpack_fields


class Packet:
    TAG = 0x00
    FIELD_COUNT = 0

    def fields(self) -> List[bytes]:
        raise NotImplementedError

    @classmethod
    def from_fields(cls, fields: List[bytes]) -> "Packet":
        raise NotImplementedError

    @property
    def kind(self) -> str:
        return self.__class__.__name__

    def __eq__(self, other: object) -> bool:
        if type(self) is not type(other):
            return False
        assert isinstance(other, Packet)
        return self.fields() == other.fields()

    def __hash__(self) -> int:
        return hash((self.TAG, tuple(self.fields())))

    def __repr__(self) -> str:
        sizes = ",".join(str(len(f)) for f in self.fields())
        return f"{self.kind}({sizes})"


class EnvelopePacket(Packet):
    FIELD_COUNT = 2

    def __init__(self, env: Envelope):
        self.env = env

    def fields(self) -> List[bytes]:
        return [self.env.wrapped_key, self.env.body]

    @classmethod
    def from_fields(cls, fields: List[bytes]) -> "Packet":
        return cls(Envelope(fields[0], fields[1]))


class CiphertextPacket(Packet):
    FIELD_COUNT = 1

    def __init__(self, ct: bytes):
        self.ct = ct

    def fields(self) -> List[bytes]:
        return [self.ct]

    @classmethod
    def from_fields(cls, fields: List[bytes]) -> "Packet":
        return cls(fields[0])


class PAuthComm(EnvelopePacket):
    TAG = 0x01


class PJoin(EnvelopePacket):
    TAG = 0x02


class PJoinFwd(EnvelopePacket):
    TAG = 0x03


class PAuthDev(EnvelopePacket):
    TAG = 0x04


class Delegation(EnvelopePacket):
    TAG = 0x05


class Challenge(CiphertextPacket):
    TAG = 0x06


class ChallengeResponse(CiphertextPacket):
    TAG = 0x07


class KeyDelivery(CiphertextPacket):
    TAG = 0x08


class PDh1(CiphertextPacket):
    TAG = 0x09


class PDh2(Packet):
    TAG = 0x0A
    FIELD_COUNT = 2

    def __init__(self, ct_nonce: bytes, ct_share: bytes):
        self.ct_nonce = ct_nonce
        self.ct_share = ct_share

    def fields(self) -> List[bytes]:
        return [self.ct_nonce, self.ct_share]

    @classmethod
    def from_fields(cls, fields: List[bytes]) -> "Packet":
        return cls(fields[0], fields[1])


class PDh3(CiphertextPacket):
    TAG = 0x0B


ALL_PACKET_TYPES: List[Type[Packet]] = [
    PAuthComm,
    PJoin,
    PJoinFwd,
    PAuthDev,
    Delegation,
    Challenge,
    ChallengeResponse,
    KeyDelivery,
    PDh1,
    PDh2,
    PDh3,
]
PACKET_TYPES_BY_TAG: Dict[int, Type[Packet]] = {
    packet_type.TAG: packet_type for packet_type in ALL_PACKET_TYPES
}


def encode(p: Packet) -> bytes:
    return bytes([p.TAG]) + pack_fields(p.fields())


def decode(b: bytes) -> Packet:
    if not b:
        raise MalformedPacket("empty packet")
    packet_type = PACKET_TYPES_BY_TAG.get(b[0])
    if packet_type is None:
        raise MalformedPacket(f"unknown tag 0x{b[0]:02X}")
    fields = unpack_fields(b[1:], packet_type.FIELD_COUNT)
    return packet_type.from_fields(fields)
