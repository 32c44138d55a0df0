"""Bounded exhaustive search over adversarial message schedules.

Mechanizes the locker's core safety claim as a brute-force oracle: across
every schedule of adversary moves up to a fixed depth, the locker reaches
Open only when the accepted auth request was user-built, the accepted
provider key equals the genuine R, and the accepted ack was user-produced.

The model is the logical protocol (one registered user, honest provider
responder, relay hops collapsed): a move delivers, drops, duplicates, or
bit-flips a pending message, or injects any message the adversary has
observed, including a full prior session it recorded. Honest-actor
responses are computed with the real step functions. Nonces are derived
deterministically from (seed, session serial) rather than drawn from an
RNG, so states reached by different schedules compare equal and the search
space is message scheduling, not nonce entropy; per-session distinctness,
the property the protocol actually relies on, is preserved.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, replace

from . import protocol
from .crypto import Digest, SecretKey, SeededRng, sha256
from .protocol import (
    BlobAuthFailure,
    ChallengeAuthFailure,
    EncodingError,
    FailureReason,
    LockerPhase,
    LockerRecord,
    LockerSession,
    PhraseMismatch,
    UserPhase,
    UserSession,
)
from .sim import flip_field_bit
from .wire import Message, MessageKind

MAX_DEPTH = 8
DEFAULT_STATE_BUDGET = 200_000
_NO_TIMEOUT_MS = 1 << 40
_DUP_CAP = 2  # more copies add nothing: the pool is also injectable knowledge

ORIGIN_USER = "user"
ORIGIN_PROVIDER = "provider"
ORIGIN_LOCKER = "locker"
ORIGIN_ADVERSARY = "adversary"


class DepthExceeded(Exception):
    """The requested depth or state budget is beyond the bounded search."""


class _QueueRng:
    """Hands out pre-derived chunks; a stand-in for the nonce source."""

    def __init__(self, chunks: list[bytes]) -> None:
        self._chunks = list(chunks)

    def take(self, n: int) -> bytes:
        chunk = self._chunks.pop(0)
        if len(chunk) != n:
            raise AssertionError(f"derived chunk is {len(chunk)} bytes, wanted {n}")
        return chunk


def _derive(seed: int, label: bytes, index: int, n: int) -> bytes:
    material = (
        (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
        + label
        + index.to_bytes(8, "big")
    )
    return hashlib.sha256(material).digest()[:n]


@dataclass(frozen=True)
class _World:
    """Fixed, state-independent facts of the model."""

    seed: int
    user_id: str
    user_key: SecretKey
    phrase: str
    provider_key: SecretKey
    h_r: Digest
    record: LockerRecord


@dataclass(frozen=True)
class ModelState:
    locker: LockerSession | None
    user: UserSession | None
    serial: int  # next challenge's nonce-derivation index
    pending: tuple[tuple[bytes, str], ...]  # sorted (raw frame, origin)
    knowledge: frozenset[tuple[bytes, str]]
    auth_genuine: bool = False
    pk_genuine: bool = False
    ack_genuine: bool = False


@dataclass(frozen=True)
class OutcomeSignature:
    locker_phase: str
    locker_failure: str | None
    user_phase: str | None
    user_failure: str | None
    locker_opened: bool
    genuine: tuple[bool, bool, bool] | None  # (auth, provider key, ack) when opened


@dataclass
class Enumeration:
    outcomes: set[OutcomeSignature]
    states_explored: int
    transitions: int
    open_states: int
    violations: list[OutcomeSignature]

    @property
    def sound(self) -> bool:
        """True iff no Open state lacked genuine key material and consent."""
        return not self.violations

    @property
    def opened(self) -> set[OutcomeSignature]:
        return {o for o in self.outcomes if o.locker_opened}


def _dst_for(kind: MessageKind) -> str:
    if kind in (MessageKind.AUTH_REQUEST, MessageKind.PROVIDER_KEY, MessageKind.ACK):
        return "locker"
    if kind is MessageKind.PROVIDER_KEY_REQUEST:
        return "provider"
    return "user"


_PKREQ_RAW = Message(MessageKind.PROVIDER_KEY_REQUEST, ()).encode()
_RESULT_RAW = Message(MessageKind.RESULT, (b"open",)).encode()


def _error_raw(reason: FailureReason) -> bytes:
    return Message(MessageKind.ERROR, (reason.value.encode("ascii"),)).encode()


def _build_world(seed: int) -> tuple[_World, frozenset[tuple[bytes, str]]]:
    setup = SeededRng(seed, b"model-setup")
    user_id = "alice"
    user_key = SecretKey(setup.take(16))
    phrase = setup.take(8).hex()
    provider_key = SecretKey(setup.take(16))
    h_r = sha256(bytes(provider_key))
    record = protocol.register_user(
        user_id,
        user_key,
        phrase,
        h_r,
        rng=_QueueRng([_derive(seed, b"register-seal", 0, 12)]),
    )
    world = _World(
        seed=seed,
        user_id=user_id,
        user_key=user_key,
        phrase=phrase,
        provider_key=provider_key,
        h_r=h_r,
        record=record,
    )
    # one complete prior session, recorded off the wire by the adversary
    auth_old, user_old = protocol.user_begin_session(
        user_id, user_key, rng=_QueueRng([_derive(seed, b"na", 0, 16)])
    )
    locker_old = protocol.locker_verify_auth(record, auth_old)
    locker_old = protocol.locker_verify_provider(h_r, provider_key, locker_old)
    challenge_old, locker_old = protocol.locker_build_challenge(
        record,
        provider_key,
        locker_old,
        now=0,
        timeout_ms=_NO_TIMEOUT_MS,
        rng=_QueueRng(
            [_derive(seed, b"nr", 0, 16), _derive(seed, b"seal", 0, 12)]
        ),
    )
    ack_old, _ = protocol.user_process_challenge(
        user_old, user_id, user_key, phrase, challenge_old
    )
    knowledge = frozenset(
        {
            (auth_old.encode(), ORIGIN_USER),
            (_PKREQ_RAW, ORIGIN_LOCKER),
            (Message(MessageKind.PROVIDER_KEY, (bytes(provider_key),)).encode(), ORIGIN_PROVIDER),
            (challenge_old.encode(), ORIGIN_LOCKER),
            (ack_old.encode(), ORIGIN_USER),
            (_RESULT_RAW, ORIGIN_LOCKER),
        }
    )
    return world, knowledge


def _initial_state(
    world: _World,
    old_knowledge: frozenset[tuple[bytes, str]],
    include_honest_user: bool,
) -> ModelState:
    if not include_honest_user:
        return ModelState(
            locker=None, user=None, serial=1, pending=(), knowledge=old_knowledge
        )
    auth, user_session = protocol.user_begin_session(
        world.user_id,
        world.user_key,
        rng=_QueueRng([_derive(world.seed, b"na", 1, 16)]),
    )
    entry = (auth.encode(), ORIGIN_USER)
    return ModelState(
        locker=None,
        user=user_session,
        serial=1,
        pending=(entry,),
        knowledge=old_knowledge | {entry},
    )


def _with_outputs(
    state: ModelState, outputs: list[tuple[bytes, str]]
) -> ModelState:
    if not outputs:
        return state
    pending = tuple(sorted(state.pending + tuple(outputs)))
    return replace(
        state, pending=pending, knowledge=state.knowledge | set(outputs)
    )


def _locker_on_auth(
    state: ModelState, world: _World, msg: Message, origin: str
) -> ModelState:
    user_id = msg.fields[0].decode("utf-8", errors="replace")
    if user_id != world.user_id:
        # unknown user: refused, and no effect on the registered user's slot
        return _with_outputs(
            state, [(_error_raw(FailureReason.BAD_USER_KEY), ORIGIN_LOCKER)]
        )
    session = protocol.locker_verify_auth(world.record, msg)
    state = replace(
        state,
        locker=session,
        auth_genuine=origin == ORIGIN_USER,
        pk_genuine=False,
        ack_genuine=False,
    )
    if session.phase is LockerPhase.USER_VERIFIED:
        return _with_outputs(state, [(_PKREQ_RAW, ORIGIN_LOCKER)])
    return _with_outputs(
        state, [(_error_raw(FailureReason.BAD_USER_KEY), ORIGIN_LOCKER)]
    )


def _locker_on_provider_key(
    state: ModelState, world: _World, msg: Message
) -> ModelState:
    if state.locker is None or state.locker.phase is not LockerPhase.USER_VERIFIED:
        return state
    provider_key = SecretKey(msg.fields[0])
    session = protocol.locker_verify_provider(world.h_r, provider_key, state.locker)
    if session.phase is LockerPhase.FAILED:
        return _with_outputs(
            replace(state, locker=session),
            [(_error_raw(FailureReason.BAD_PROVIDER_KEY), ORIGIN_LOCKER)],
        )
    rng = _QueueRng(
        [
            _derive(world.seed, b"nr", state.serial, 16),
            _derive(world.seed, b"seal", state.serial, 12),
        ]
    )
    try:
        challenge, session = protocol.locker_build_challenge(
            world.record,
            provider_key,
            session,
            now=0,
            timeout_ms=_NO_TIMEOUT_MS,
            rng=rng,
        )
    except BlobAuthFailure:
        session = replace(
            session,
            phase=LockerPhase.FAILED,
            failure=FailureReason.BLOB_AUTH_FAILURE,
        )
        return _with_outputs(
            replace(state, locker=session),
            [(_error_raw(FailureReason.BLOB_AUTH_FAILURE), ORIGIN_LOCKER)],
        )
    state = replace(
        state,
        locker=session,
        serial=state.serial + 1,
        pk_genuine=msg.fields[0] == bytes(world.provider_key),
    )
    return _with_outputs(state, [(challenge.encode(), ORIGIN_LOCKER)])


def _locker_on_ack(state: ModelState, msg: Message, origin: str) -> ModelState:
    if state.locker is None or state.locker.phase is not LockerPhase.CHALLENGE_SENT:
        return state
    session = protocol.locker_verify_ack(state.locker, msg, now=0)
    if session.phase is LockerPhase.OPEN:
        state = replace(
            state, locker=session, ack_genuine=origin == ORIGIN_USER
        )
        return _with_outputs(state, [(_RESULT_RAW, ORIGIN_LOCKER)])
    assert session.failure is not None
    return _with_outputs(
        replace(state, locker=session),
        [(_error_raw(session.failure), ORIGIN_LOCKER)],
    )


def _user_on_message(state: ModelState, world: _World, msg: Message) -> ModelState:
    user = state.user
    if user is None:
        return state
    if msg.kind is MessageKind.CHALLENGE:
        if user.phase is not UserPhase.AWAITING_CHALLENGE:
            return state
        try:
            ack, user = protocol.user_process_challenge(
                user, world.user_id, world.user_key, world.phrase, msg
            )
        except ChallengeAuthFailure:
            return replace(
                state,
                user=replace(
                    user,
                    phase=UserPhase.FAILED,
                    failure=FailureReason.CHALLENGE_AUTH_FAILURE,
                ),
            )
        except (PhraseMismatch, EncodingError):
            return replace(
                state,
                user=replace(
                    user,
                    phase=UserPhase.FAILED,
                    failure=FailureReason.PHRASE_MISMATCH,
                ),
            )
        return _with_outputs(
            replace(state, user=user), [(ack.encode(), ORIGIN_USER)]
        )
    if msg.kind is MessageKind.RESULT and user.phase is UserPhase.ACK_SENT:
        return replace(state, user=replace(user, phase=UserPhase.DONE))
    if msg.kind is MessageKind.ERROR and user.phase not in (
        UserPhase.DONE,
        UserPhase.FAILED,
    ):
        try:
            reason = FailureReason(msg.fields[0].decode("ascii"))
        except (UnicodeDecodeError, ValueError):
            reason = None
        return replace(
            state, user=replace(user, phase=UserPhase.FAILED, failure=reason)
        )
    return state


def _deliver(
    state: ModelState, world: _World, raw: bytes, origin: str, cache: dict
) -> ModelState:
    msg = cache.get(raw)
    if msg is None:
        msg = Message.decode(raw)
        cache[raw] = msg
    dst = _dst_for(msg.kind)
    if dst == "locker":
        if msg.kind is MessageKind.AUTH_REQUEST:
            return _locker_on_auth(state, world, msg, origin)
        if msg.kind is MessageKind.PROVIDER_KEY:
            return _locker_on_provider_key(state, world, msg)
        return _locker_on_ack(state, msg, origin)
    if dst == "provider":
        reply = Message(MessageKind.PROVIDER_KEY, (bytes(world.provider_key),))
        return _with_outputs(state, [(reply.encode(), ORIGIN_PROVIDER)])
    return _user_on_message(state, world, msg)


def _without_pending(state: ModelState, entry: tuple[bytes, str]) -> ModelState:
    pool = list(state.pending)
    pool.remove(entry)
    return replace(state, pending=tuple(pool))


def _successors(
    state: ModelState, world: _World, cache: dict
) -> list[ModelState]:
    out: list[ModelState] = []
    distinct = sorted(set(state.pending))
    for entry in distinct:
        raw, origin = entry
        removed = _without_pending(state, entry)
        # deliver
        out.append(_deliver(removed, world, raw, origin, cache))
        # drop
        out.append(removed)
        # duplicate (bounded; beyond that it's indistinguishable from inject)
        if state.pending.count(entry) < _DUP_CAP:
            out.append(
                replace(state, pending=tuple(sorted(state.pending + (entry,))))
            )
        # tamper: flip one bit in each field, delivered as adversary material
        msg = cache.get(raw)
        if msg is None:
            msg = Message.decode(raw)
            cache[raw] = msg
        for index in range(len(msg.fields)):
            flipped = flip_field_bit(msg, index).encode()
            out.append(_deliver(removed, world, flipped, ORIGIN_ADVERSARY, cache))
    # inject: replay anything ever observed, to its natural destination
    for raw, origin in sorted(state.knowledge):
        out.append(_deliver(state, world, raw, origin, cache))
    return out


def _signature(state: ModelState) -> OutcomeSignature:
    locker_phase = state.locker.phase if state.locker else LockerPhase.IDLE
    locker_failure = state.locker.failure if state.locker else None
    opened = locker_phase is LockerPhase.OPEN
    return OutcomeSignature(
        locker_phase=locker_phase.value,
        locker_failure=locker_failure.value if locker_failure else None,
        user_phase=state.user.phase.value if state.user else None,
        user_failure=(
            state.user.failure.value if state.user and state.user.failure else None
        ),
        locker_opened=opened,
        genuine=(
            (state.auth_genuine, state.pk_genuine, state.ack_genuine)
            if opened
            else None
        ),
    )


def enumerate_small_traces(
    depth: int = 6,
    *,
    seed: int = 0,
    include_honest_user: bool = True,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> Enumeration:
    """Breadth-first search of every adversary schedule up to `depth` moves.

    Returns the set of reachable outcome signatures plus any soundness
    violations (Open without genuine auth, provider key, and user ack).
    Raises DepthExceeded when depth or the visited-state budget is blown.
    """
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"depth {depth} exceeds bounded-search cap {MAX_DEPTH}")
    world, old_knowledge = _build_world(seed)
    initial = _initial_state(world, old_knowledge, include_honest_user)
    cache: dict[bytes, Message] = {}
    visited: dict[ModelState, int] = {initial: depth}
    frontier: deque[tuple[ModelState, int]] = deque([(initial, depth)])
    outcomes: set[OutcomeSignature] = set()
    violations: list[OutcomeSignature] = []
    open_states = 0
    transitions = 0
    while frontier:
        state, budget = frontier.popleft()
        sig = _signature(state)
        if sig not in outcomes:
            outcomes.add(sig)
            if sig.locker_opened:
                open_states += 1
                if sig.genuine != (True, True, True):
                    violations.append(sig)
        if budget == 0:
            continue
        for nxt in _successors(state, world, cache):
            transitions += 1
            prior = visited.get(nxt)
            if prior is None or prior < budget - 1:
                visited[nxt] = budget - 1
                if len(visited) > state_budget:
                    raise DepthExceeded(
                        f"visited states exceeded budget {state_budget}"
                    )
                frontier.append((nxt, budget - 1))
    return Enumeration(
        outcomes=outcomes,
        states_explored=len(visited),
        transitions=transitions,
        open_states=open_states,
        violations=violations,
    )
