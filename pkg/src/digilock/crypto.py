"""Cryptographic primitives for the locker protocol.

Deliberately narrow: SHA-256 hashing, HMAC-SHA-256 as the keyed PRF,
ChaCha20-Poly1305 for authenticated encryption, bytewise digest XOR,
constant-time comparison, and a seedable nonce source so simulations can
be replayed bit for bit. No custom cryptography lives here; everything
is a thin wrapper over stdlib ``hashlib``/``hmac`` and ``cryptography``.
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass
from typing import Protocol

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

DIGEST_LEN = 32
NONCE_LEN = 16
SEAL_NONCE_LEN = 12
TAG_LEN = 16
MAX_KEY_LEN = 64


class CryptoError(Exception):
    """Base class for failures raised by this module."""


class AuthFailure(CryptoError):
    """Ciphertext failed authentication: wrong key or tampered bytes."""


class EntropyUnavailable(CryptoError):
    """The platform random source could not produce bytes."""


class Digest(bytes):
    """A 32-byte hash output. Equality is constant-time in the content."""

    def __new__(cls, value: bytes) -> "Digest":
        raw = bytes(value)
        if len(raw) != DIGEST_LEN:
            raise ValueError(f"digest must be {DIGEST_LEN} bytes, got {len(raw)}")
        return super().__new__(cls, raw)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (bytes, bytearray, memoryview)):
            return NotImplemented
        return hmac.compare_digest(bytes(self), bytes(other))

    def __ne__(self, other: object) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = bytes.__hash__


class Nonce(bytes):
    """A 16-byte per-session random value."""

    def __new__(cls, value: bytes) -> "Nonce":
        raw = bytes(value)
        if len(raw) != NONCE_LEN:
            raise ValueError(f"nonce must be {NONCE_LEN} bytes, got {len(raw)}")
        return super().__new__(cls, raw)


class SecretKey(bytes):
    """A user or provider secret, 1-64 bytes. repr never shows the content."""

    def __new__(cls, value: bytes) -> "SecretKey":
        raw = bytes(value)
        if not 1 <= len(raw) <= MAX_KEY_LEN:
            raise ValueError(f"secret key must be 1-{MAX_KEY_LEN} bytes, got {len(raw)}")
        return super().__new__(cls, raw)

    def __repr__(self) -> str:
        return f"SecretKey(<redacted, {len(self)} bytes>)"


@dataclass(frozen=True)
class Ciphertext:
    """Authenticated ciphertext: 12-byte nonce, opaque body, 16-byte tag."""

    nonce: bytes
    body: bytes
    tag: bytes

    def __post_init__(self) -> None:
        if len(self.nonce) != SEAL_NONCE_LEN:
            raise ValueError(f"seal nonce must be {SEAL_NONCE_LEN} bytes")
        if len(self.tag) != TAG_LEN:
            raise ValueError(f"tag must be {TAG_LEN} bytes")

    def to_bytes(self) -> bytes:
        return self.nonce + self.body + self.tag

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Ciphertext":
        if len(raw) < SEAL_NONCE_LEN + TAG_LEN:
            raise ValueError("ciphertext too short")
        return cls(
            nonce=raw[:SEAL_NONCE_LEN],
            body=raw[SEAL_NONCE_LEN:-TAG_LEN],
            tag=raw[-TAG_LEN:],
        )


class Rng(Protocol):
    """Source of raw bytes; system entropy in production, seeded in simulation."""

    def take(self, n: int) -> bytes: ...


class SystemRng:
    """CSPRNG-backed byte source (os.urandom)."""

    def take(self, n: int) -> bytes:
        try:
            return os.urandom(n)
        except (NotImplementedError, OSError) as exc:  # pragma: no cover
            raise EntropyUnavailable(str(exc)) from exc


class SeededRng:
    """Deterministic byte stream: SHA-256 over (seed, context, counter).

    Lets a scenario replay with identical nonces given the same 64-bit
    seed. Not a CSPRNG; used only by the simulation harness and tests.
    """

    def __init__(self, seed: int, context: bytes = b"") -> None:
        self._prefix = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big") + context
        self._counter = 0

    def take(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            block = hashlib.sha256(
                self._prefix + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
            out += block
        return bytes(out[:n])

    def clone(self) -> "SeededRng":
        twin = SeededRng.__new__(SeededRng)
        twin._prefix = self._prefix
        twin._counter = self._counter
        return twin


_system_rng = SystemRng()


def sha256(data: bytes) -> Digest:
    """Hash arbitrary bytes to a 32-byte digest."""
    return Digest(hashlib.sha256(data).digest())


def prf(key: bytes, data: bytes) -> Digest:
    """Keyed pseudo-random function: HMAC-SHA-256 under a 32-byte key."""
    if len(key) != DIGEST_LEN:
        raise ValueError(f"prf key must be {DIGEST_LEN} bytes, got {len(key)}")
    return Digest(hmac.new(bytes(key), data, hashlib.sha256).digest())


def xor_digests(a: bytes, b: bytes) -> Digest:
    """Bytewise XOR of two 32-byte digests."""
    if len(a) != DIGEST_LEN or len(b) != DIGEST_LEN:
        raise ValueError("xor_digests operands must be 32 bytes each")
    return Digest(bytes(x ^ y for x, y in zip(a, b)))


def fresh_nonce(rng: Rng | None = None) -> Nonce:
    """Draw a fresh 16-byte session nonce."""
    return Nonce((rng or _system_rng).take(NONCE_LEN))


def seal(key: bytes, plaintext: bytes, rng: Rng | None = None) -> Ciphertext:
    """Encrypt and authenticate under a 32-byte key with a fresh nonce."""
    if len(key) != DIGEST_LEN:
        raise ValueError(f"seal key must be {DIGEST_LEN} bytes, got {len(key)}")
    nonce = (rng or _system_rng).take(SEAL_NONCE_LEN)
    sealed = ChaCha20Poly1305(bytes(key)).encrypt(nonce, plaintext, None)
    return Ciphertext(nonce=nonce, body=sealed[:-TAG_LEN], tag=sealed[-TAG_LEN:])


def unseal(key: bytes, ct: Ciphertext) -> bytes:
    """Decrypt a sealed blob; raises AuthFailure on wrong key or tampering."""
    if len(key) != DIGEST_LEN:
        raise ValueError(f"unseal key must be {DIGEST_LEN} bytes, got {len(key)}")
    try:
        return ChaCha20Poly1305(bytes(key)).decrypt(ct.nonce, ct.body + ct.tag, None)
    except InvalidTag as exc:
        raise AuthFailure("ciphertext did not authenticate under this key") from exc


def ct_equal(a: bytes, b: bytes) -> bool:
    """Constant-time equality for equal-length inputs; False if lengths differ."""
    return hmac.compare_digest(bytes(a), bytes(b))
