"""Actor state machines for the user / provider / locker access protocol.

The locker stores, per user, the digest of (user id, user key) and a blob
sealed under the dual-derived key L, so that reopening the blob proves both
the user's and the provider's secrets were supplied. A session then runs:

    user      -> locker : AuthRequest  [user id, PRF_D(N_a), N_a]
    locker    -> provider: ProviderKeyRequest
    provider  -> locker : ProviderKey  [R]
    locker    -> user   : Challenge    [seal(K_s, (m, N_r))]
    user      -> locker : Ack          [h(N_a || N_r)]
    locker    -> user   : Result

All step functions are pure given (state, message, now); time enters only
through an explicit clock value, and randomness through an explicit rng.
States are immutable; transitions return new states.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .crypto import (
    AuthFailure,
    Ciphertext,
    Digest,
    Nonce,
    Rng,
    SecretKey,
    ct_equal,
    fresh_nonce,
    prf,
    seal,
    sha256,
    unseal,
    xor_digests,
)
from .wire import Message, MessageKind, WireError, decode_fields, encode_fields

USER_ID_MAX = 64
PHRASE_MAX = 256
SEPARATOR_BYTE = 0x1F  # reserved separator; user ids must not contain it
DEFAULT_TIMEOUT_MS = 5000


class ProtocolError(Exception):
    """Base class for protocol-level failures."""


class OutOfOrder(ProtocolError):
    """A step function was called in a state that does not permit it."""


class EncodingError(ProtocolError):
    """A field violates its encoding constraints (length, separator byte)."""


class BlobAuthFailure(ProtocolError):
    """The registration blob refused to open: the derived L is wrong."""


class ChallengeAuthFailure(ProtocolError):
    """The challenge refused to open: the receiver's session key is wrong."""


class PhraseMismatch(ProtocolError):
    """The challenge opened but the secret phrase differs from the held copy."""


class FailureReason(enum.Enum):
    BAD_USER_KEY = "bad-user-key"
    BAD_PROVIDER_KEY = "bad-provider-key"
    BLOB_AUTH_FAILURE = "blob-auth-failure"
    TIMEOUT = "timeout"
    BAD_ACK = "bad-ack"
    CHALLENGE_AUTH_FAILURE = "challenge-auth-failure"
    PHRASE_MISMATCH = "phrase-mismatch"
    REPLAYED_NONCE = "replayed-nonce"  # only with the opt-in seen-nonce cache


class LockerPhase(enum.Enum):
    IDLE = "idle"
    USER_VERIFIED = "user-verified"
    PROVIDER_VERIFIED = "provider-verified"
    CHALLENGE_SENT = "challenge-sent"
    OPEN = "open"
    FAILED = "failed"


class UserPhase(enum.Enum):
    START = "start"
    AWAITING_CHALLENGE = "awaiting-challenge"
    ACK_SENT = "ack-sent"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class LockerRecord:
    """Per-user stored tuple: user id, digest of (id, key), sealed blob."""

    user_id: str
    d_u: Digest
    sealed: Ciphertext


@dataclass(frozen=True)
class LockerSession:
    user_id: str
    phase: LockerPhase
    n_a: Nonce | None = None
    n_r: Nonce | None = None
    k_s: Digest | None = None
    deadline: int | None = None
    failure: FailureReason | None = None


@dataclass(frozen=True)
class UserSession:
    user_id: str
    phase: UserPhase
    n_a: Nonce | None = None
    k_s: Digest | None = None
    failure: FailureReason | None = None


def user_id_bytes(user_id: str) -> bytes:
    raw = user_id.encode("utf-8")
    if not 1 <= len(raw) <= USER_ID_MAX:
        raise EncodingError(f"user id must be 1-{USER_ID_MAX} UTF-8 bytes")
    if SEPARATOR_BYTE in raw:
        raise EncodingError("user id must not contain byte 0x1f")
    return raw


def phrase_bytes(phrase: str) -> bytes:
    raw = phrase.encode("utf-8")
    if not 1 <= len(raw) <= PHRASE_MAX:
        raise EncodingError(f"secret phrase must be 1-{PHRASE_MAX} UTF-8 bytes")
    return raw


def user_digest(user_id: str, key: SecretKey) -> Digest:
    """Digest binding a user id to its key: h(U_i || K_i), canonical concat."""
    return sha256(encode_fields([user_id_bytes(user_id), bytes(key)]))


def locker_key(d_u: Digest, h_r: Digest) -> Digest:
    """Blob-sealing key L: requires both the user digest and h(R)."""
    return xor_digests(d_u, h_r)


def session_key(user_id: str, key: SecretKey, n_a: Nonce) -> Digest:
    """Per-session key K_s = h(U_i || K_i || N_a), fresh per user nonce."""
    return sha256(encode_fields([user_id_bytes(user_id), bytes(key), bytes(n_a)]))


def ack_digest(n_a: Nonce, n_r: Nonce) -> Digest:
    """The user's consent token h(N_a || N_r)."""
    return sha256(encode_fields([bytes(n_a), bytes(n_r)]))


def register_user(
    user_id: str,
    key: SecretKey,
    phrase: str,
    h_r: Digest,
    *,
    rng: Rng | None = None,
) -> LockerRecord:
    """Build a user's stored record inside the locker trust boundary.

    The blob holds (phrase, key, user id) sealed under L; the plaintext key
    is not retained anywhere else.
    """
    uid = user_id_bytes(user_id)
    m = phrase_bytes(phrase)
    d_u = user_digest(user_id, key)
    blob = seal(locker_key(d_u, h_r), encode_fields([m, bytes(key), uid]), rng)
    return LockerRecord(user_id=user_id, d_u=d_u, sealed=blob)


def user_begin_session(
    user_id: str, key: SecretKey, *, rng: Rng | None = None
) -> tuple[Message, UserSession]:
    """Open a session: fresh N_a plus a PRF proof of key knowledge."""
    uid = user_id_bytes(user_id)
    n_a = fresh_nonce(rng)
    proof = prf(user_digest(user_id, key), bytes(n_a))
    msg = Message(MessageKind.AUTH_REQUEST, (uid, bytes(proof), bytes(n_a)))
    state = UserSession(user_id=user_id, phase=UserPhase.AWAITING_CHALLENGE, n_a=n_a)
    return msg, state


def locker_verify_auth(record: LockerRecord, msg: Message) -> LockerSession:
    """Check the PRF proof against the stored user digest (constant-time)."""
    if msg.kind is not MessageKind.AUTH_REQUEST:
        raise ValueError(f"expected auth-request, got {msg.kind.label}")
    uid_raw, proof, n_a_raw = msg.fields
    n_a = Nonce(n_a_raw)
    user_id = uid_raw.decode("utf-8", errors="replace")
    if user_id != record.user_id:
        return LockerSession(
            user_id=user_id,
            phase=LockerPhase.FAILED,
            n_a=n_a,
            failure=FailureReason.BAD_USER_KEY,
        )
    expected = prf(record.d_u, bytes(n_a))
    if ct_equal(expected, proof):
        return LockerSession(
            user_id=record.user_id, phase=LockerPhase.USER_VERIFIED, n_a=n_a
        )
    return LockerSession(
        user_id=record.user_id,
        phase=LockerPhase.FAILED,
        n_a=n_a,
        failure=FailureReason.BAD_USER_KEY,
    )


def locker_verify_provider(
    stored_h_r: Digest, provider_key: SecretKey, session: LockerSession
) -> LockerSession:
    """Match h(provider key) against the provisioned digest."""
    if session.phase is not LockerPhase.USER_VERIFIED:
        raise OutOfOrder(f"provider check in phase {session.phase.value}")
    if ct_equal(sha256(bytes(provider_key)), stored_h_r):
        return replace(session, phase=LockerPhase.PROVIDER_VERIFIED)
    return replace(
        session,
        phase=LockerPhase.FAILED,
        failure=FailureReason.BAD_PROVIDER_KEY,
    )


def locker_build_challenge(
    record: LockerRecord,
    provider_key: SecretKey,
    session: LockerSession,
    *,
    now: int,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    rng: Rng | None = None,
) -> tuple[Message, LockerSession]:
    """Derive L, open the blob, and seal (m, N_r) under the session key.

    Opening the blob is the non-repudiation pivot: it succeeds only when
    both the stored user digest and the supplied provider key are genuine.
    """
    if session.phase is not LockerPhase.PROVIDER_VERIFIED:
        raise OutOfOrder(f"challenge build in phase {session.phase.value}")
    assert session.n_a is not None
    key_l = locker_key(record.d_u, sha256(bytes(provider_key)))
    try:
        plain = unseal(key_l, record.sealed)
    except AuthFailure as exc:
        raise BlobAuthFailure("registration blob did not open under L") from exc
    try:
        parts = decode_fields(plain)
    except WireError as exc:
        raise EncodingError("registration blob decoded to malformed fields") from exc
    if len(parts) != 3:
        raise EncodingError(f"registration blob held {len(parts)} fields, wanted 3")
    m, key_raw, uid = parts
    k_s = session_key(uid.decode("utf-8"), SecretKey(key_raw), session.n_a)
    n_r = fresh_nonce(rng)
    body = seal(k_s, encode_fields([m, bytes(n_r)]), rng)
    msg = Message(MessageKind.CHALLENGE, (body.to_bytes(),))
    state = replace(
        session,
        phase=LockerPhase.CHALLENGE_SENT,
        n_r=n_r,
        k_s=k_s,
        deadline=now + timeout_ms,
    )
    return msg, state


def user_process_challenge(
    session: UserSession,
    user_id: str,
    key: SecretKey,
    held_phrase: str,
    msg: Message,
) -> tuple[Message, UserSession]:
    """Open the challenge, verify the phrase, and emit the consent digest.

    Raises ChallengeAuthFailure when the challenge was sealed under a
    different session key (stale nonce, impersonator) and PhraseMismatch
    when it opens but the phrase is not the one this user registered.
    """
    if msg.kind is not MessageKind.CHALLENGE:
        raise ValueError(f"expected challenge, got {msg.kind.label}")
    if session.phase is not UserPhase.AWAITING_CHALLENGE or session.n_a is None:
        raise OutOfOrder(f"challenge received in phase {session.phase.value}")
    k_s = session_key(user_id, key, session.n_a)
    ct = Ciphertext.from_bytes(msg.fields[0])
    try:
        plain = unseal(k_s, ct)
    except AuthFailure as exc:
        raise ChallengeAuthFailure("challenge did not open under K_s") from exc
    try:
        parts = decode_fields(plain)
    except WireError as exc:
        raise EncodingError("challenge decoded to malformed fields") from exc
    if len(parts) != 2:
        raise EncodingError(f"challenge held {len(parts)} fields, wanted 2")
    m, n_r_raw = parts
    if m != phrase_bytes(held_phrase):
        raise PhraseMismatch("decrypted phrase differs from the held copy")
    n_r = Nonce(n_r_raw)
    ack = Message(MessageKind.ACK, (bytes(ack_digest(session.n_a, n_r)),))
    state = replace(session, phase=UserPhase.ACK_SENT, k_s=k_s)
    return ack, state


def locker_verify_ack(
    session: LockerSession, msg: Message, now: int
) -> LockerSession:
    """Open the locker iff the consent digest matches within the deadline."""
    if msg.kind is not MessageKind.ACK:
        raise ValueError(f"expected ack, got {msg.kind.label}")
    if session.phase is not LockerPhase.CHALLENGE_SENT:
        raise OutOfOrder(f"ack received in phase {session.phase.value}")
    assert session.n_a is not None and session.n_r is not None
    assert session.deadline is not None
    if now > session.deadline:
        return replace(
            session, phase=LockerPhase.FAILED, failure=FailureReason.TIMEOUT
        )
    if ct_equal(msg.fields[0], ack_digest(session.n_a, session.n_r)):
        return replace(session, phase=LockerPhase.OPEN)
    return replace(session, phase=LockerPhase.FAILED, failure=FailureReason.BAD_ACK)


def locker_check_timeout(session: LockerSession, now: int) -> LockerSession:
    """End a challenge-sent session whose ack deadline has passed."""
    if (
        session.phase is LockerPhase.CHALLENGE_SENT
        and session.deadline is not None
        and now > session.deadline
    ):
        return replace(
            session, phase=LockerPhase.FAILED, failure=FailureReason.TIMEOUT
        )
    return session
