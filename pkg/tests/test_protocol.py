import hashlib
import random
from dataclasses import replace

import pytest

from digilock import protocol
from digilock.crypto import Digest, Nonce, SecretKey, SeededRng, sha256, unseal
from digilock.protocol import (
    BlobAuthFailure,
    ChallengeAuthFailure,
    EncodingError,
    FailureReason,
    LockerPhase,
    OutOfOrder,
    PhraseMismatch,
    UserPhase,
    ack_digest,
    locker_build_challenge,
    locker_check_timeout,
    locker_verify_ack,
    locker_verify_auth,
    locker_verify_provider,
    register_user,
    session_key,
    user_begin_session,
    user_digest,
    user_process_challenge,
)
from digilock.wire import Message, MessageKind, decode_fields

# SHA-256 of the canonical length-prefixed ("alice", "k1") concatenation,
# computed with openssl and frozen.
D_U_ALICE_K1 = "f558f9c6bc39db0d85409b72e6d07a4f7415ac4925ed053a8f91dc1ea1c853e1"


def _length_prefixed(*fields: bytes) -> bytes:
    # independent re-implementation of the canonical concatenation
    out = b""
    for f in fields:
        out += len(f).to_bytes(4, "big") + f
    return out


def _world(seed=1):
    provider_key = SecretKey(b"provider-master-key")
    h_r = sha256(bytes(provider_key))
    creds = ("alice", SecretKey(b"alice-key"), "summer rain")
    record = register_user(creds[0], creds[1], creds[2], h_r, rng=SeededRng(seed))
    return record, creds, provider_key, h_r


def _run_to_provider_verified(seed=1):
    record, creds, provider_key, h_r = _world(seed)
    auth, user_state = user_begin_session(creds[0], creds[1], rng=SeededRng(seed, b"u"))
    locker_state = locker_verify_auth(record, auth)
    locker_state = locker_verify_provider(h_r, provider_key, locker_state)
    return record, creds, provider_key, h_r, user_state, locker_state


def test_user_digest_matches_independent_hash():
    d_u = user_digest("alice", SecretKey(b"k1"))
    assert d_u.hex() == D_U_ALICE_K1
    recomputed = hashlib.sha256(_length_prefixed(b"alice", b"k1")).hexdigest()
    assert d_u.hex() == recomputed


def test_register_round_trip_and_key_derivation():
    record, (user_id, key, phrase), provider_key, h_r = _world()
    assert record.user_id == user_id
    assert record.d_u == user_digest(user_id, key)
    # independent oracle for L: hash and XOR recomputed by hand
    d_u = hashlib.sha256(_length_prefixed(user_id.encode(), bytes(key))).digest()
    h_r_raw = hashlib.sha256(bytes(provider_key)).digest()
    l_by_hand = bytes(a ^ b for a, b in zip(d_u, h_r_raw))
    plain = unseal(Digest(l_by_hand), record.sealed)
    m, k_i, uid = decode_fields(plain)
    assert m == phrase.encode()
    assert k_i == bytes(key)
    assert uid == user_id.encode()


def test_register_rejects_bad_user_ids():
    h_r = sha256(b"R")
    with pytest.raises(EncodingError):
        register_user("", SecretKey(b"k"), "m", h_r)
    with pytest.raises(EncodingError):
        register_user("a" * 65, SecretKey(b"k"), "m", h_r)
    with pytest.raises(EncodingError):
        register_user("bad\x1fid", SecretKey(b"k"), "m", h_r)
    with pytest.raises(EncodingError):
        register_user("fine", SecretKey(b"k"), "x" * 257, h_r)


def test_begin_session_fresh_nonces_and_framing():
    _, (user_id, key, _), _, _ = _world()
    msg1, state1 = user_begin_session(user_id, key)
    msg2, state2 = user_begin_session(user_id, key)
    assert state1.n_a != state2.n_a
    assert msg1.fields[2] == bytes(state1.n_a)
    assert Message.decode(msg1.encode()) == msg1
    assert state1.phase is UserPhase.AWAITING_CHALLENGE


def test_locker_verify_auth_honest():
    record, (user_id, key, _), _, _ = _world()
    auth, _ = user_begin_session(user_id, key)
    state = locker_verify_auth(record, auth)
    assert state.phase is LockerPhase.USER_VERIFIED
    assert state.n_a == Nonce(auth.fields[2])


def test_locker_verify_auth_flipped_proof_bit():
    record, (user_id, key, _), _, _ = _world()
    auth, _ = user_begin_session(user_id, key)
    fields = list(auth.fields)
    proof = bytearray(fields[1])
    proof[0] ^= 0x01
    fields[1] = bytes(proof)
    state = locker_verify_auth(record, Message(MessageKind.AUTH_REQUEST, tuple(fields)))
    assert state.phase is LockerPhase.FAILED
    assert state.failure is FailureReason.BAD_USER_KEY


def test_locker_verify_auth_wrong_key():
    record, (user_id, _, _), _, _ = _world()
    auth, _ = user_begin_session(user_id, SecretKey(b"not-alices-key"))
    state = locker_verify_auth(record, auth)
    assert state.phase is LockerPhase.FAILED
    assert state.failure is FailureReason.BAD_USER_KEY


def test_locker_verify_provider_paths():
    record, (user_id, key, _), provider_key, h_r = _world()
    auth, _ = user_begin_session(user_id, key)
    verified = locker_verify_auth(record, auth)
    good = locker_verify_provider(h_r, provider_key, verified)
    assert good.phase is LockerPhase.PROVIDER_VERIFIED
    bad = locker_verify_provider(h_r, SecretKey(b"interloper"), verified)
    assert bad.phase is LockerPhase.FAILED
    assert bad.failure is FailureReason.BAD_PROVIDER_KEY
    idle = protocol.LockerSession(user_id=user_id, phase=LockerPhase.IDLE)
    with pytest.raises(OutOfOrder):
        locker_verify_provider(h_r, provider_key, idle)


def test_build_challenge_honest_round_trip():
    record, (user_id, key, phrase), provider_key, h_r, user_state, locker_state = (
        _run_to_provider_verified()
    )
    challenge, locker_state = locker_build_challenge(
        record, provider_key, locker_state, now=0
    )
    assert locker_state.phase is LockerPhase.CHALLENGE_SENT
    assert locker_state.deadline == protocol.DEFAULT_TIMEOUT_MS
    assert locker_state.k_s == session_key(user_id, key, locker_state.n_a)
    # the challenge opens under the user's independently derived key
    from digilock.crypto import Ciphertext

    k_s = session_key(user_id, key, user_state.n_a)
    plain = unseal(k_s, Ciphertext.from_bytes(challenge.fields[0]))
    m, n_r = decode_fields(plain)
    assert m == phrase.encode()
    assert n_r == bytes(locker_state.n_r)


def test_build_challenge_forged_state_hits_blob_auth_failure():
    # a provider key that skipped the hash check must still die on the blob
    record, _, _, h_r, _, locker_state = _run_to_provider_verified()
    forged = replace(locker_state)  # already PROVIDER_VERIFIED
    with pytest.raises(BlobAuthFailure):
        locker_build_challenge(record, SecretKey(b"wrong-master"), forged, now=0)


def test_build_challenge_out_of_order():
    record, _, provider_key, _, _, locker_state = _run_to_provider_verified()
    idle = replace(locker_state, phase=LockerPhase.IDLE)
    with pytest.raises(OutOfOrder):
        locker_build_challenge(record, provider_key, idle, now=0)


def test_user_process_challenge_honest_ack_matches_hand_hash():
    record, (user_id, key, phrase), provider_key, h_r, user_state, locker_state = (
        _run_to_provider_verified()
    )
    challenge, locker_state = locker_build_challenge(
        record, provider_key, locker_state, now=0
    )
    ack, user_state = user_process_challenge(
        user_state, user_id, key, phrase, challenge
    )
    assert user_state.phase is UserPhase.ACK_SENT
    by_hand = hashlib.sha256(
        _length_prefixed(bytes(user_state.n_a), bytes(locker_state.n_r))
    ).digest()
    assert ack.fields[0] == by_hand


def test_user_process_challenge_stale_nonce_replay():
    # challenge sealed under a session key for an older N_a' fails to open
    record, (user_id, key, phrase), provider_key, h_r, user_state, locker_state = (
        _run_to_provider_verified()
    )
    stale = replace(locker_state, n_a=Nonce(b"\x11" * 16))
    challenge, _ = locker_build_challenge(record, provider_key, stale, now=0)
    with pytest.raises(ChallengeAuthFailure):
        user_process_challenge(user_state, user_id, key, phrase, challenge)


def test_user_process_challenge_phrase_mismatch():
    # a key-holding double re-seals a wrong phrase; the user must refuse
    from digilock.crypto import seal
    from digilock.wire import encode_fields

    _, (user_id, key, phrase), _, _, user_state, _ = _run_to_provider_verified()
    k_s = session_key(user_id, key, user_state.n_a)
    forged = seal(k_s, encode_fields([b"not the phrase", b"\x22" * 16]))
    msg = Message(MessageKind.CHALLENGE, (forged.to_bytes(),))
    with pytest.raises(PhraseMismatch):
        user_process_challenge(user_state, user_id, key, phrase, msg)


def test_locker_verify_ack_paths():
    record, (user_id, key, phrase), provider_key, h_r, user_state, locker_state = (
        _run_to_provider_verified()
    )
    challenge, locker_state = locker_build_challenge(
        record, provider_key, locker_state, now=0
    )
    ack, _ = user_process_challenge(user_state, user_id, key, phrase, challenge)

    opened = locker_verify_ack(locker_state, ack, now=10)
    assert opened.phase is LockerPhase.OPEN

    late = locker_verify_ack(locker_state, ack, now=locker_state.deadline + 1)
    assert late.phase is LockerPhase.FAILED
    assert late.failure is FailureReason.TIMEOUT

    swapped = Message(
        MessageKind.ACK,
        (bytes(ack_digest(locker_state.n_r, locker_state.n_a)),),  # wrong order
    )
    rejected = locker_verify_ack(locker_state, swapped, now=10)
    assert rejected.phase is LockerPhase.FAILED
    assert rejected.failure is FailureReason.BAD_ACK

    with pytest.raises(OutOfOrder):
        locker_verify_ack(opened, ack, now=10)


def test_locker_check_timeout():
    record, _, provider_key, _, _, locker_state = _run_to_provider_verified()
    _, locker_state = locker_build_challenge(record, provider_key, locker_state, now=0)
    assert locker_check_timeout(locker_state, now=10) is locker_state
    expired = locker_check_timeout(locker_state, now=locker_state.deadline + 1)
    assert expired.phase is LockerPhase.FAILED
    assert expired.failure is FailureReason.TIMEOUT


def test_session_key_freshness_across_sessions():
    _, (user_id, key, _), _, _ = _world()
    rnd = random.Random(0xF5E5)
    by_nonce = {}
    for _ in range(10_000):
        n_a = Nonce(rnd.randbytes(16))
        by_nonce[bytes(n_a)] = bytes(session_key(user_id, key, n_a))
    # distinct nonces always produced distinct session keys
    assert len(set(by_nonce.values())) == len(by_nonce)


def test_canonical_concat_is_unambiguous():
    # ("ab","c") and ("a","bc") must hash differently
    a = sha256(protocol.encode_fields([b"ab", b"c"]))
    b = sha256(protocol.encode_fields([b"a", b"bc"]))
    assert a != b
