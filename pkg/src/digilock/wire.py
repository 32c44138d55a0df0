"""Wire framing for protocol messages.

Frame layout, bit-exact: version byte 0x01, kind byte, 2-byte big-endian
field count, then each field as a 4-byte big-endian length prefix followed
by the field bytes. The same length-prefixed field encoding doubles as the
canonical way to concatenate values before hashing, which keeps digests
unambiguous for adjacent variable-length inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

VERSION = 0x01

_LEN_PREFIX = 4
_COUNT_PREFIX = 2
_HEADER = 2  # version + kind


class WireError(Exception):
    """Base class for framing failures."""


class TruncatedEncoding(WireError):
    """A declared length runs past the end of the buffer."""


class TrailingBytes(WireError):
    """Leftover bytes after the declared content was consumed."""


class BadFrame(WireError):
    """Version, kind, field count, or field length out of contract."""


class MessageKind(enum.IntEnum):
    AUTH_REQUEST = 0x01
    PROVIDER_KEY_REQUEST = 0x02
    PROVIDER_KEY = 0x03
    CHALLENGE = 0x04
    ACK = 0x05
    RESULT = 0x06
    ERROR = 0x7F

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


# (min, max) length per field, by kind. AuthRequest carries
# [user id, 32-byte PRF proof, 16-byte nonce]; Challenge carries one
# opaque sealed blob (>= 28 bytes: 12-byte nonce + 16-byte tag).
_FIELD_LIMITS: dict[MessageKind, tuple[tuple[int, int], ...]] = {
    MessageKind.AUTH_REQUEST: ((1, 64), (32, 32), (16, 16)),
    MessageKind.PROVIDER_KEY_REQUEST: (),
    MessageKind.PROVIDER_KEY: ((1, 64),),
    MessageKind.CHALLENGE: ((28, 1 << 20),),
    MessageKind.ACK: ((32, 32),),
    MessageKind.RESULT: ((1, 64),),
    MessageKind.ERROR: ((1, 64),),
}


def encode_fields(fields: Iterable[bytes]) -> bytes:
    """Length-prefix and concatenate a field list (arbitrary bytes allowed)."""
    out = bytearray()
    for field in fields:
        out += len(field).to_bytes(_LEN_PREFIX, "big")
        out += field
    return bytes(out)


def decode_fields(data: bytes) -> list[bytes]:
    """Inverse of encode_fields; recovers the exact field list."""
    fields: list[bytes] = []
    pos = 0
    end = len(data)
    while pos < end:
        if end - pos < _LEN_PREFIX:
            raise TrailingBytes(f"{end - pos} stray byte(s) after last field")
        length = int.from_bytes(data[pos : pos + _LEN_PREFIX], "big")
        pos += _LEN_PREFIX
        if end - pos < length:
            raise TruncatedEncoding(
                f"field declares {length} bytes, only {end - pos} remain"
            )
        fields.append(data[pos : pos + length])
        pos += length
    return fields


@dataclass(frozen=True)
class Message:
    """A tagged, framed protocol message."""

    kind: MessageKind
    fields: tuple[bytes, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields", tuple(bytes(f) for f in self.fields))
        _check_fields(self.kind, self.fields)

    def encode(self) -> bytes:
        head = bytes((VERSION, self.kind))
        count = len(self.fields).to_bytes(_COUNT_PREFIX, "big")
        return head + count + encode_fields(self.fields)

    @classmethod
    def decode(cls, raw: bytes) -> "Message":
        if len(raw) < _HEADER + _COUNT_PREFIX:
            raise TruncatedEncoding("frame shorter than header")
        if raw[0] != VERSION:
            raise BadFrame(f"unsupported version byte 0x{raw[0]:02x}")
        try:
            kind = MessageKind(raw[1])
        except ValueError:
            raise BadFrame(f"unknown message kind 0x{raw[1]:02x}") from None
        count = int.from_bytes(raw[_HEADER : _HEADER + _COUNT_PREFIX], "big")
        body = raw[_HEADER + _COUNT_PREFIX :]
        fields = decode_fields(body)
        if len(fields) != count:
            raise BadFrame(f"declared {count} fields, found {len(fields)}")
        return cls(kind=kind, fields=tuple(fields))


def _check_fields(kind: MessageKind, fields: Sequence[bytes]) -> None:
    limits = _FIELD_LIMITS[kind]
    if len(fields) != len(limits):
        raise BadFrame(
            f"{kind.label} takes {len(limits)} field(s), got {len(fields)}"
        )
    for i, (field, (lo, hi)) in enumerate(zip(fields, limits)):
        if not lo <= len(field) <= hi:
            raise BadFrame(
                f"{kind.label} field {i} length {len(field)} outside [{lo}, {hi}]"
            )
