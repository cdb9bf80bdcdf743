import struct
from typing import List, Optional

from shared.errors import MalformedPacket

LENGTH_PREFIX = struct.Struct(">I")


def pack_fields(fields: List[bytes]) -> bytes:
    parts: List[bytes] = []
    for field in fields:
        parts.append(LENGTH_PREFIX.pack(len(field)))
        parts.append(field)
    return b"".join(parts)


def unpack_fields(data: bytes, expected: Optional[int] = None) -> List[bytes]:
    """Strict inverse of pack_fields: no truncation, no trailing bytes"""
    fields: List[bytes] = []
    pos = 0
    while pos < len(data):
        if pos + LENGTH_PREFIX.size > len(data):
            raise MalformedPacket(f"truncated length prefix at offset {pos}")
        (length,) = LENGTH_PREFIX.unpack_from(data, pos)
        pos += LENGTH_PREFIX.size
        if pos + length > len(data):
            raise MalformedPacket(
                f"field at offset {pos} claims {length} bytes, {len(data) - pos} left"
            )
        fields.append(data[pos : pos + length])
        pos += length

    if expected is not None and len(fields) != expected:
        raise MalformedPacket(f"expected {expected} fields, found {len(fields)}")
    return fields


def int_to_bytes(value: int) -> bytes:
    if value < 0:
        raise ValueError("Only non-negative integers are encoded")
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def bytes_to_int(data: bytes) -> int:
    if not data:
        raise MalformedPacket("empty integer field")
    return int.from_bytes(data, "big")
