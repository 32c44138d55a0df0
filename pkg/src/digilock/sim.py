"""Deterministic simulated network with a pluggable adversary seat.

Three actors (user agent, provider seat, locker) exchange framed messages
over FIFO channels; user<->locker traffic always crosses the provider seat.
A scenario wires the actors, optionally replaces a seat with an adversary
or installs a channel tap, pumps the queue to quiescence, and returns a
structured outcome plus a trace. All randomness flows from a single 64-bit
seed and time from an explicit millisecond clock, so a scenario replays
byte for byte.

The adversary is Dolev-Yao-lite: it records, replays, drops, and bit-flips
messages on channels it sits on, and never learns secrets that did not
cross its wire.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable

from . import protocol
from .crypto import (
    AuthFailure,
    Ciphertext,
    Nonce,
    Rng,
    SecretKey,
    SeededRng,
    sha256,
    unseal,
)
from .protocol import (
    DEFAULT_TIMEOUT_MS,
    BlobAuthFailure,
    ChallengeAuthFailure,
    EncodingError,
    FailureReason,
    LockerPhase,
    LockerSession,
    PhraseMismatch,
    UserPhase,
    UserSession,
)
from .store import Registry, UnknownUser
from .wire import Message, MessageKind, encode_fields

SCENARIO_NAMES = (
    "honest",
    "replay",
    "impersonation",
    "repudiation-user",
    "repudiation-provider",
    "tamper",
)

TAMPER_TARGETS = ("prf-field", "challenge-body", "ack-digest")

ACTOR_USER = "user"
ACTOR_PROVIDER = "provider"
ACTOR_LOCKER = "locker"
ACTOR_ADVERSARY = "adversary"


class SimClock:
    """Integer-millisecond clock advanced explicitly by the driver."""

    def __init__(self, start: int = 0) -> None:
        self.now = start

    def advance(self, ms: int) -> None:
        self.now += ms


@dataclass(frozen=True)
class TraceStep:
    t: int
    sender: str
    receiver: str
    origin: str
    kind: str
    payload_sha256: str
    verdict: str

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "sender": self.sender,
            "receiver": self.receiver,
            "origin": self.origin,
            "kind": self.kind,
            "payload_sha256": self.payload_sha256,
            "verdict": self.verdict,
        }


class Trace:
    """Ordered log of channel hops; payloads appear only as digests."""

    def __init__(self) -> None:
        self.steps: list[TraceStep] = []

    def record(
        self,
        t: int,
        sender: str,
        receiver: str,
        origin: str,
        msg: Message,
        verdict: str,
    ) -> None:
        self.steps.append(
            TraceStep(
                t=t,
                sender=sender,
                receiver=receiver,
                origin=origin,
                kind=msg.kind.label,
                payload_sha256=sha256(msg.encode()).hex(),
                verdict=verdict,
            )
        )

    def kind_sequence(self) -> list[str]:
        """Kinds of origin sends (relay hops collapsed), delivered only."""
        return [
            s.kind
            for s in self.steps
            if s.sender == s.origin and s.verdict != "dropped"
        ]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(step.to_json(), separators=(",", ":")) + "\n"
            for step in self.steps
        )


HONEST_KIND_SEQUENCE = [
    "auth-request",
    "provider-key-request",
    "provider-key",
    "challenge",
    "ack",
    "result",
]


@dataclass
class Packet:
    src: str
    dst: str
    origin: str
    msg: Message
    replayed: bool = False


def _error_message(reason: FailureReason) -> Message:
    return Message(MessageKind.ERROR, (reason.value.encode("ascii"),))


def flip_field_bit(msg: Message, field_index: int, bit: int = 0) -> Message:
    """Return a copy of msg with one bit of one field inverted."""
    fields = list(msg.fields)
    mutated = bytearray(fields[field_index])
    mutated[bit // 8] ^= 1 << (bit % 8)
    fields[field_index] = bytes(mutated)
    return Message(msg.kind, tuple(fields))


def adversary_try_open_challenge(
    msg: Message, user_id: str, n_a: Nonce | None
) -> FailureReason | None:
    """Attempt to open a challenge with on-wire knowledge only (no user key).

    Returns the failure reason, or None if some guess opened it (which
    would mean the session-key derivation is broken).
    """
    ct = Ciphertext.from_bytes(msg.fields[0])
    guesses = [sha256(b"")]
    if n_a is not None:
        # the wire reveals the user id and N_a but never K_i
        guesses.append(
            sha256(encode_fields([user_id.encode("utf-8"), bytes(n_a)]))
        )
        guesses.append(protocol.session_key(user_id, SecretKey(b"\x00"), n_a))
    for key in guesses:
        try:
            unseal(key, ct)
            return None
        except AuthFailure:
            continue
    return FailureReason.CHALLENGE_AUTH_FAILURE


@dataclass(frozen=True)
class Credentials:
    user_id: str
    key: SecretKey
    phrase: str


class UserActor:
    """Honest user agent: opens a session, answers the challenge once."""

    def __init__(self, creds: Credentials, rng: Rng | None = None) -> None:
        self.creds = creds
        self.rng = rng
        self.session: UserSession | None = None

    def begin(self) -> list[tuple[str, Message, str]]:
        msg, self.session = protocol.user_begin_session(
            self.creds.user_id, self.creds.key, rng=self.rng
        )
        return [(ACTOR_PROVIDER, msg, ACTOR_USER)]

    def handle(
        self, msg: Message, origin: str, now: int
    ) -> list[tuple[str, Message, str]]:
        if msg.kind is MessageKind.CHALLENGE:
            if self.session is None or self.session.phase is not UserPhase.AWAITING_CHALLENGE:
                return []
            try:
                ack, self.session = protocol.user_process_challenge(
                    self.session,
                    self.creds.user_id,
                    self.creds.key,
                    self.creds.phrase,
                    msg,
                )
            except ChallengeAuthFailure:
                self._fail(FailureReason.CHALLENGE_AUTH_FAILURE)
                return []
            except (PhraseMismatch, EncodingError):
                self._fail(FailureReason.PHRASE_MISMATCH)
                return []
            return [(ACTOR_PROVIDER, ack, ACTOR_USER)]
        if (
            msg.kind is MessageKind.RESULT
            and self.session is not None
            and self.session.phase is UserPhase.ACK_SENT
        ):
            self.session = replace(self.session, phase=UserPhase.DONE)
        elif (
            msg.kind is MessageKind.ERROR
            and self.session is not None
            and self.session.phase not in (UserPhase.DONE, UserPhase.FAILED)
        ):
            self._fail(_reason_from_wire(msg.fields[0]))
        return []

    def _fail(self, reason: FailureReason | None) -> None:
        assert self.session is not None
        self.session = replace(self.session, phase=UserPhase.FAILED, failure=reason)


def _reason_from_wire(raw: bytes) -> FailureReason | None:
    try:
        return FailureReason(raw.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        return None


class ProviderActor:
    """Honest provider seat: answers key requests, relays everything else."""

    def __init__(self, provider_key: SecretKey) -> None:
        self.provider_key = provider_key

    def handle(
        self, msg: Message, origin: str, now: int
    ) -> list[tuple[str, Message, str]]:
        if msg.kind is MessageKind.PROVIDER_KEY_REQUEST:
            reply = Message(MessageKind.PROVIDER_KEY, (bytes(self.provider_key),))
            return [(ACTOR_LOCKER, reply, ACTOR_PROVIDER)]
        if origin == ACTOR_USER:
            return [(ACTOR_LOCKER, msg, origin)]
        if origin == ACTOR_LOCKER:
            return [(ACTOR_USER, msg, origin)]
        return []


class ImpersonatingProvider(ProviderActor):
    """Provider seat gone rogue: relays the genuine auth request and the
    genuine key, then steals the challenge and tries to open it itself."""

    def __init__(self, provider_key: SecretKey, user_id: str) -> None:
        super().__init__(provider_key)
        self.user_id = user_id
        self.seen_n_a: Nonce | None = None
        self.failure: FailureReason | None = None

    def handle(
        self, msg: Message, origin: str, now: int
    ) -> list[tuple[str, Message, str]]:
        if msg.kind is MessageKind.AUTH_REQUEST:
            self.seen_n_a = Nonce(msg.fields[2])
        if msg.kind is MessageKind.CHALLENGE:
            self.failure = adversary_try_open_challenge(
                msg, self.user_id, self.seen_n_a
            )
            return []  # never forwarded; the user waits in vain
        return super().handle(msg, origin, now)


class ReplaySeat:
    """Occupies the user endpoint during a replay run: it can resend a
    recorded auth request but cannot answer the resulting challenge."""

    def __init__(self, user_id: str, recorded_auth: Message) -> None:
        self.user_id = user_id
        self.recorded_auth = recorded_auth
        self.n_a = Nonce(recorded_auth.fields[2])
        self.failure: FailureReason | None = None

    def handle(
        self, msg: Message, origin: str, now: int
    ) -> list[tuple[str, Message, str]]:
        if msg.kind is MessageKind.CHALLENGE:
            self.failure = adversary_try_open_challenge(msg, self.user_id, self.n_a)
        return []


class LockerActor:
    """The locker module: verifies both parties, then waits on consent.

    `reject_seen_nonces` turns on an optional replay cache that refuses an
    auth request whose nonce was already accepted; it defaults off, where
    the only replay defense is the ack the replayer cannot produce.
    """

    def __init__(
        self,
        registry: Registry,
        *,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        rng: Rng | None = None,
        reject_seen_nonces: bool = False,
    ) -> None:
        self.registry = registry
        self.timeout_ms = timeout_ms
        self.rng = rng
        self.reject_seen_nonces = reject_seen_nonces
        self.sessions: dict[str, LockerSession] = {}
        self._seen_nonces: set[bytes] = set()
        self._awaiting_provider: deque[str] = deque()

    def session_for(self, user_id: str) -> LockerSession | None:
        return self.sessions.get(user_id)

    def handle(
        self, msg: Message, origin: str, now: int
    ) -> list[tuple[str, Message, str]]:
        if msg.kind is MessageKind.AUTH_REQUEST:
            return self._on_auth_request(msg)
        if msg.kind is MessageKind.PROVIDER_KEY:
            return self._on_provider_key(msg, now)
        if msg.kind is MessageKind.ACK:
            return self._on_ack(msg, now)
        return []

    def _on_auth_request(self, msg: Message) -> list[tuple[str, Message, str]]:
        user_id = msg.fields[0].decode("utf-8", errors="replace")
        try:
            record = self.registry.get_record(user_id)
        except UnknownUser:
            self.sessions[user_id] = LockerSession(
                user_id=user_id,
                phase=LockerPhase.FAILED,
                failure=FailureReason.BAD_USER_KEY,
            )
            return [(ACTOR_PROVIDER, _error_message(FailureReason.BAD_USER_KEY), ACTOR_LOCKER)]
        if self.reject_seen_nonces and msg.fields[2] in self._seen_nonces:
            self.sessions[user_id] = LockerSession(
                user_id=user_id,
                phase=LockerPhase.FAILED,
                failure=FailureReason.REPLAYED_NONCE,
            )
            return [
                (ACTOR_PROVIDER, _error_message(FailureReason.REPLAYED_NONCE), ACTOR_LOCKER)
            ]
        # one active session per user: a fresh auth request replaces it
        state = protocol.locker_verify_auth(record, msg)
        self.sessions[user_id] = state
        if state.phase is LockerPhase.USER_VERIFIED:
            self._seen_nonces.add(msg.fields[2])
            self._awaiting_provider.append(user_id)
            request = Message(MessageKind.PROVIDER_KEY_REQUEST, ())
            return [(ACTOR_PROVIDER, request, ACTOR_LOCKER)]
        return [(ACTOR_PROVIDER, _error_message(FailureReason.BAD_USER_KEY), ACTOR_LOCKER)]

    def _on_provider_key(
        self, msg: Message, now: int
    ) -> list[tuple[str, Message, str]]:
        while self._awaiting_provider:
            user_id = self._awaiting_provider.popleft()
            session = self.sessions.get(user_id)
            if session is not None and session.phase is LockerPhase.USER_VERIFIED:
                break
        else:
            return []  # unsolicited provider key
        provider_key = SecretKey(msg.fields[0])
        record = self.registry.get_record(user_id)
        session = protocol.locker_verify_provider(
            self.registry.h_r, provider_key, session
        )
        if session.phase is LockerPhase.FAILED:
            self.sessions[user_id] = session
            return [
                (ACTOR_PROVIDER, _error_message(FailureReason.BAD_PROVIDER_KEY), ACTOR_LOCKER)
            ]
        try:
            challenge, session = protocol.locker_build_challenge(
                record,
                provider_key,
                session,
                now=now,
                timeout_ms=self.timeout_ms,
                rng=self.rng,
            )
        except BlobAuthFailure:
            self.sessions[user_id] = replace(
                session,
                phase=LockerPhase.FAILED,
                failure=FailureReason.BLOB_AUTH_FAILURE,
            )
            return [
                (ACTOR_PROVIDER, _error_message(FailureReason.BLOB_AUTH_FAILURE), ACTOR_LOCKER)
            ]
        self.sessions[user_id] = session
        return [(ACTOR_PROVIDER, challenge, ACTOR_LOCKER)]

    def _on_ack(self, msg: Message, now: int) -> list[tuple[str, Message, str]]:
        for user_id, session in self.sessions.items():
            if session.phase is LockerPhase.CHALLENGE_SENT:
                break
        else:
            return []  # no session awaiting consent
        session = protocol.locker_verify_ack(session, msg, now)
        self.sessions[user_id] = session
        if session.phase is LockerPhase.OPEN:
            result = Message(MessageKind.RESULT, (b"open",))
            return [(ACTOR_PROVIDER, result, ACTOR_LOCKER)]
        assert session.failure is not None
        return [(ACTOR_PROVIDER, _error_message(session.failure), ACTOR_LOCKER)]

    def check_timeouts(self, now: int) -> None:
        for user_id, session in self.sessions.items():
            self.sessions[user_id] = protocol.locker_check_timeout(session, now)


class RecordingTap:
    """Passive wiretap: copies every crossing message into a knowledge list."""

    def __init__(self, knowledge: list[Message]) -> None:
        self.knowledge = knowledge

    def intercept(self, packet: Packet) -> tuple[Message | None, str]:
        self.knowledge.append(packet.msg)
        return packet.msg, "delivered"


class TamperTap:
    """Flips one bit of one field of the first message of a given kind."""

    def __init__(self, kind: MessageKind, field_index: int, bit: int = 0) -> None:
        self.kind = kind
        self.field_index = field_index
        self.bit = bit
        self.done = False

    def intercept(self, packet: Packet) -> tuple[Message | None, str]:
        if not self.done and packet.msg.kind is self.kind:
            self.done = True
            return flip_field_bit(packet.msg, self.field_index, self.bit), "modified"
        return packet.msg, "delivered"


class Simulation:
    """Single-threaded event loop over FIFO channels with optional taps."""

    def __init__(
        self,
        actors: dict[str, object],
        *,
        clock: SimClock,
        trace: Trace,
        taps: dict[tuple[str, str], object] | None = None,
        hop_ms: int = 1,
    ) -> None:
        self.actors = actors
        self.clock = clock
        self.trace = trace
        self.taps = taps or {}
        self.hop_ms = hop_ms
        self.queue: deque[Packet] = deque()

    def post(self, src: str, dst: str, msg: Message, origin: str) -> None:
        if {src, dst} == {ACTOR_USER, ACTOR_LOCKER}:
            raise ValueError("user<->locker traffic must cross the provider seat")
        self.queue.append(Packet(src=src, dst=dst, origin=origin, msg=msg))

    def inject(
        self, dst: str, msg: Message, origin: str, src: str = ACTOR_ADVERSARY
    ) -> None:
        """Queue a recorded message for delivery (a replay)."""
        self.queue.append(
            Packet(src=src, dst=dst, origin=origin, msg=msg, replayed=True)
        )

    def send_all(self, src: str, outs: Iterable[tuple[str, Message, str]]) -> None:
        for dst, msg, origin in outs:
            self.post(src, dst, msg, origin)

    def pump(self, max_hops: int = 200) -> None:
        hops = 0
        while self.queue:
            hops += 1
            if hops > max_hops:
                raise RuntimeError(f"simulation exceeded {max_hops} hops")
            packet = self.queue.popleft()
            self.clock.advance(self.hop_ms)
            tap = self.taps.get((packet.src, packet.dst))
            if tap is not None:
                delivered, verdict = tap.intercept(packet)
            else:
                delivered, verdict = packet.msg, "delivered"
            if delivered is None:
                self.trace.record(
                    self.clock.now,
                    packet.src,
                    packet.dst,
                    packet.origin,
                    packet.msg,
                    "dropped",
                )
                continue
            if packet.replayed and verdict == "delivered":
                verdict = "replayed"
            self.trace.record(
                self.clock.now,
                packet.src,
                packet.dst,
                packet.origin,
                delivered,
                verdict,
            )
            actor = self.actors.get(packet.dst)
            if actor is None:
                continue
            outs = actor.handle(delivered, packet.origin, self.clock.now)
            self.send_all(packet.dst, outs)


@dataclass(frozen=True)
class ScenarioOutcome:
    """Terminal states of one scenario run."""

    scenario: str
    locker_phase: str
    user_phase: str | None
    locker_opened: bool
    failure_reason: str | None
    user_failure: str | None = None
    adversary_failure: str | None = None

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "locker_phase": self.locker_phase,
            "user_phase": self.user_phase,
            "locker_opened": self.locker_opened,
            "failure_reason": self.failure_reason,
            "user_failure": self.user_failure,
            "adversary_failure": self.adversary_failure,
        }


@dataclass(frozen=True)
class ScenarioSpec:
    """Loadable scenario definition: {scenario, seed, variant, timeout_ms}."""

    scenario: str
    seed: int = 0
    variant: str | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "tamper" and self.variant not in (None, *TAMPER_TARGETS):
            raise ValueError(f"unknown tamper variant {self.variant!r}")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "variant": self.variant,
            "timeout_ms": self.timeout_ms,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioSpec":
        return cls(
            scenario=obj["scenario"],
            seed=int(obj.get("seed", 0)),
            variant=obj.get("variant"),
            timeout_ms=int(obj.get("timeout_ms", DEFAULT_TIMEOUT_MS)),
        )


def _outcome(
    scenario: str,
    locker_session: LockerSession | None,
    user_session: UserSession | None,
    adversary_failure: FailureReason | None = None,
) -> ScenarioOutcome:
    locker_phase = locker_session.phase if locker_session else LockerPhase.IDLE
    failure = locker_session.failure if locker_session else None
    user_failure = user_session.failure if user_session else None
    return ScenarioOutcome(
        scenario=scenario,
        locker_phase=locker_phase.value,
        user_phase=user_session.phase.value if user_session else None,
        locker_opened=locker_phase is LockerPhase.OPEN,
        failure_reason=failure.value if failure else None,
        user_failure=user_failure.value if user_failure else None,
        adversary_failure=adversary_failure.value if adversary_failure else None,
    )


def seed_world(
    seed: int, *, user_id: str = "alice"
) -> tuple[Registry, Credentials, SecretKey]:
    """Provision a registry and register one user, all from the seed."""
    setup = SeededRng(seed, b"setup")
    provider_key = SecretKey(setup.take(16))
    creds = Credentials(
        user_id=user_id,
        key=SecretKey(setup.take(16)),
        phrase=setup.take(8).hex(),
    )
    registry = Registry.provision(provider_key)
    registry.register(
        creds.user_id, creds.key, creds.phrase, rng=SeededRng(seed, b"register")
    )
    return registry, creds, provider_key


@dataclass
class SessionRun:
    """Handles left behind by a driven session, for assertions and vault ops."""

    user: UserActor | None
    provider: ProviderActor
    locker: LockerActor
    clock: SimClock
    trace: Trace
    sim: Simulation


def drive_session(
    registry: Registry,
    creds: Credentials,
    provider_key: SecretKey,
    *,
    clock: SimClock | None = None,
    trace: Trace | None = None,
    rng_user: Rng | None = None,
    rng_locker: Rng | None = None,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    taps: dict[tuple[str, str], object] | None = None,
    provider: ProviderActor | None = None,
    finish_timeouts: bool = True,
) -> SessionRun:
    """Run one access session to quiescence (the shared scenario core)."""
    clock = clock or SimClock()
    trace = trace or Trace()
    user = UserActor(creds, rng=rng_user)
    provider = provider or ProviderActor(provider_key)
    locker = LockerActor(registry, timeout_ms=timeout_ms, rng=rng_locker)
    sim = Simulation(
        {ACTOR_USER: user, ACTOR_PROVIDER: provider, ACTOR_LOCKER: locker},
        clock=clock,
        trace=trace,
        taps=taps,
    )
    sim.send_all(ACTOR_USER, user.begin())
    sim.pump()
    if finish_timeouts:
        session = locker.session_for(creds.user_id)
        if session is not None and session.phase is LockerPhase.CHALLENGE_SENT:
            assert session.deadline is not None
            clock.advance(session.deadline - clock.now + 1)
            locker.check_timeouts(clock.now)
    return SessionRun(
        user=user, provider=provider, locker=locker, clock=clock, trace=trace, sim=sim
    )


def run_honest_session(
    seed: int = 0, *, timeout_ms: int = DEFAULT_TIMEOUT_MS
) -> tuple[ScenarioOutcome, Trace]:
    registry, creds, provider_key = seed_world(seed)
    run = drive_session(
        registry,
        creds,
        provider_key,
        rng_user=SeededRng(seed, b"user"),
        rng_locker=SeededRng(seed, b"locker"),
        timeout_ms=timeout_ms,
    )
    assert run.user is not None
    outcome = _outcome(
        "honest", run.locker.session_for(creds.user_id), run.user.session
    )
    return outcome, run.trace


def run_repudiation_scenario(
    variant: str, seed: int = 0, *, timeout_ms: int = DEFAULT_TIMEOUT_MS
) -> tuple[ScenarioOutcome, Trace]:
    """One party supplies a wrong secret; the locker must refuse to open."""
    if variant not in ("wrong-user-key", "wrong-provider-key"):
        raise ValueError(f"unknown repudiation variant {variant!r}")
    registry, creds, provider_key = seed_world(seed)
    wrong = SeededRng(seed, b"wrong-secret")
    if variant == "wrong-user-key":
        creds = replace(creds, key=SecretKey(wrong.take(16)))
        scenario = "repudiation-user"
    else:
        provider_key = SecretKey(wrong.take(16))
        scenario = "repudiation-provider"
    run = drive_session(
        registry,
        creds,
        provider_key,
        rng_user=SeededRng(seed, b"user"),
        rng_locker=SeededRng(seed, b"locker"),
        timeout_ms=timeout_ms,
    )
    assert run.user is not None
    outcome = _outcome(
        scenario, run.locker.session_for(creds.user_id), run.user.session
    )
    return outcome, run.trace


def run_replay_scenario(
    seed: int = 0, *, timeout_ms: int = DEFAULT_TIMEOUT_MS
) -> tuple[ScenarioOutcome, Trace]:
    """Record an honest session, then resend its auth request verbatim.

    The locker accepts the stale proof and issues a fresh challenge, but
    the replaying adversary holds no user key, cannot derive the session
    key, and the session dies at the ack deadline.
    """
    registry, creds, provider_key = seed_world(seed)
    knowledge: list[Message] = []
    tap = RecordingTap(knowledge)
    run = drive_session(
        registry,
        creds,
        provider_key,
        rng_user=SeededRng(seed, b"user"),
        rng_locker=SeededRng(seed, b"locker"),
        timeout_ms=timeout_ms,
        taps={
            (ACTOR_USER, ACTOR_PROVIDER): tap,
            (ACTOR_PROVIDER, ACTOR_USER): tap,
        },
    )
    recorded_auth = next(
        m for m in knowledge if m.kind is MessageKind.AUTH_REQUEST
    )
    seat = ReplaySeat(creds.user_id, recorded_auth)
    locker = run.locker
    sim = Simulation(
        {
            ACTOR_USER: seat,
            ACTOR_PROVIDER: ProviderActor(provider_key),
            ACTOR_LOCKER: locker,
        },
        clock=run.clock,
        trace=run.trace,
    )
    sim.inject(ACTOR_PROVIDER, recorded_auth, origin=ACTOR_USER)
    sim.pump()
    session = locker.session_for(creds.user_id)
    if session is not None and session.phase is LockerPhase.CHALLENGE_SENT:
        assert session.deadline is not None
        run.clock.advance(session.deadline - run.clock.now + 1)
        locker.check_timeouts(run.clock.now)
    outcome = _outcome(
        "replay",
        locker.session_for(creds.user_id),
        None,
        adversary_failure=seat.failure,
    )
    return outcome, run.trace


def run_impersonation_scenario(
    seed: int = 0, *, timeout_ms: int = DEFAULT_TIMEOUT_MS
) -> tuple[ScenarioOutcome, Trace]:
    """The provider seat forwards genuine traffic but keeps the challenge,
    failing to open it without the user key; the locker times out."""
    registry, creds, provider_key = seed_world(seed)
    rogue = ImpersonatingProvider(provider_key, creds.user_id)
    run = drive_session(
        registry,
        creds,
        provider_key,
        rng_user=SeededRng(seed, b"user"),
        rng_locker=SeededRng(seed, b"locker"),
        timeout_ms=timeout_ms,
        provider=rogue,
    )
    assert run.user is not None
    outcome = _outcome(
        "impersonation",
        run.locker.session_for(creds.user_id),
        run.user.session,
        adversary_failure=rogue.failure,
    )
    return outcome, run.trace


_TAMPER_PLANS = {
    # target -> (edge, message kind, field index)
    "prf-field": ((ACTOR_PROVIDER, ACTOR_LOCKER), MessageKind.AUTH_REQUEST, 1),
    "challenge-body": ((ACTOR_PROVIDER, ACTOR_USER), MessageKind.CHALLENGE, 0),
    "ack-digest": ((ACTOR_PROVIDER, ACTOR_LOCKER), MessageKind.ACK, 0),
}


def run_tamper_scenario(
    target: str,
    seed: int = 0,
    *,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    bit: int = 0,
) -> tuple[ScenarioOutcome, Trace]:
    """Flip one bit of one protocol field in transit; the locker must not open."""
    try:
        edge, kind, field_index = _TAMPER_PLANS[target]
    except KeyError:
        raise ValueError(f"unknown tamper target {target!r}") from None
    registry, creds, provider_key = seed_world(seed)
    run = drive_session(
        registry,
        creds,
        provider_key,
        rng_user=SeededRng(seed, b"user"),
        rng_locker=SeededRng(seed, b"locker"),
        timeout_ms=timeout_ms,
        taps={edge: TamperTap(kind, field_index, bit)},
    )
    assert run.user is not None
    outcome = _outcome(
        "tamper", run.locker.session_for(creds.user_id), run.user.session
    )
    return outcome, run.trace


def run_scenario(spec: ScenarioSpec) -> tuple[ScenarioOutcome, Trace]:
    """Dispatch a scenario spec to its driver."""
    if spec.scenario == "honest":
        return run_honest_session(spec.seed, timeout_ms=spec.timeout_ms)
    if spec.scenario == "replay":
        return run_replay_scenario(spec.seed, timeout_ms=spec.timeout_ms)
    if spec.scenario == "impersonation":
        return run_impersonation_scenario(spec.seed, timeout_ms=spec.timeout_ms)
    if spec.scenario == "repudiation-user":
        return run_repudiation_scenario(
            "wrong-user-key", spec.seed, timeout_ms=spec.timeout_ms
        )
    if spec.scenario == "repudiation-provider":
        return run_repudiation_scenario(
            "wrong-provider-key", spec.seed, timeout_ms=spec.timeout_ms
        )
    if spec.scenario == "tamper":
        return run_tamper_scenario(
            spec.variant or "challenge-body", spec.seed, timeout_ms=spec.timeout_ms
        )
    raise ValueError(f"unknown scenario {spec.scenario!r}")


_EXPECTED_FAILURES = {
    "replay": "timeout",
    "impersonation": "timeout",
    "repudiation-user": "bad-user-key",
    "repudiation-provider": "bad-provider-key",
}

_EXPECTED_TAMPER_FAILURES = {
    "prf-field": "bad-user-key",
    "challenge-body": "timeout",
    "ack-digest": "bad-ack",
}


def outcome_matches_expectation(spec: ScenarioSpec, outcome: ScenarioOutcome) -> bool:
    """True iff the run ended the way the scenario is supposed to end."""
    if spec.scenario == "honest":
        return outcome.locker_opened
    if outcome.locker_opened:
        return False
    if spec.scenario == "tamper":
        expected = _EXPECTED_TAMPER_FAILURES[spec.variant or "challenge-body"]
        return outcome.failure_reason == expected
    return outcome.failure_reason == _EXPECTED_FAILURES[spec.scenario]
