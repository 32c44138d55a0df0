"""Operator CLI: provision a locker, register users, run access sessions,
manage vault documents, and execute named attack scenarios.

Secrets travel via files, never argv; the secret phrase is the exception
(low sensitivity next to the keys) and is documented as argv-visible.

Exit codes are a stable contract:
  0 success, 1 usage error, 2 already provisioned, 3 duplicate user,
  4 bad user key, 5 bad provider key, 6 session not open,
  7 unknown document, 8 other protocol or store failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import protocol, sim, store
from .crypto import SecretKey
from .protocol import DEFAULT_TIMEOUT_MS, LockerPhase
from .sim import Credentials, ScenarioSpec, drive_session

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ALREADY_PROVISIONED = 2
EXIT_DUPLICATE_USER = 3
EXIT_BAD_USER_KEY = 4
EXIT_BAD_PROVIDER_KEY = 5
EXIT_SESSION_NOT_OPEN = 6
EXIT_UNKNOWN_DOCUMENT = 7
EXIT_FAILURE = 8

STORE_ENV_VAR = "DIGILOCK_STORE"

_FAILURE_EXITS = {
    "bad-user-key": EXIT_BAD_USER_KEY,
    "bad-provider-key": EXIT_BAD_PROVIDER_KEY,
}


def _read_key_file(path: str) -> SecretKey:
    raw = Path(path).read_bytes()
    return SecretKey(raw)


def _store_path(args: argparse.Namespace) -> Path:
    if args.store:
        return Path(args.store)
    env = os.environ.get(STORE_ENV_VAR)
    if env:
        return Path(env)
    print(f"error: --store or ${STORE_ENV_VAR} is required", file=sys.stderr)
    raise SystemExit(EXIT_USAGE)


def _emit(args: argparse.Namespace, text: str, payload: dict) -> None:
    if args.output == "json":
        print(json.dumps(payload, separators=(",", ":")))
    else:
        print(text)


def cmd_provision(args: argparse.Namespace) -> int:
    locker_store = store.LockerStore(_store_path(args))
    provider_key = _read_key_file(args.provider_key_file)
    try:
        registry = locker_store.provision(provider_key)
    except store.AlreadyProvisioned as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALREADY_PROVISIONED
    _emit(
        args,
        registry.h_r.hex(),
        {"h_r": registry.h_r.hex(), "store": str(locker_store.root)},
    )
    return EXIT_OK


def cmd_register(args: argparse.Namespace) -> int:
    locker_store = store.LockerStore(_store_path(args))
    try:
        registry = locker_store.load_registry()
        registry.register(args.user, _read_key_file(args.key_file), args.phrase)
    except store.DuplicateUser as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DUPLICATE_USER
    except (store.StoreError, protocol.ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    locker_store.save_registry(registry)
    _emit(args, f"registered {args.user}", {"registered": args.user})
    return EXIT_OK


def _run_local_access(args: argparse.Namespace, locker_store: store.LockerStore):
    """Run a full access session against the on-disk registry."""
    registry = locker_store.load_registry()
    creds = Credentials(
        user_id=args.user,
        key=_read_key_file(args.key_file),
        phrase=args.phrase,
    )
    provider_key = _read_key_file(args.provider_key_file)
    run = drive_session(
        registry, creds, provider_key, timeout_ms=args.timeout_ms
    )
    return registry, run


def _access_exit(session, args: argparse.Namespace) -> int:
    if session is not None and session.phase is LockerPhase.OPEN:
        _emit(args, "OPEN", {"locker_opened": True, "failure_reason": None})
        return EXIT_OK
    reason = session.failure.value if session and session.failure else "no-session"
    _emit(
        args,
        f"DENIED ({reason})",
        {"locker_opened": False, "failure_reason": reason},
    )
    return _FAILURE_EXITS.get(reason, EXIT_FAILURE)


def cmd_access(args: argparse.Namespace) -> int:
    locker_store = store.LockerStore(_store_path(args))
    try:
        _, run = _run_local_access(args, locker_store)
    except (store.StoreError, protocol.ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return _access_exit(run.locker.session_for(args.user), args)


def cmd_vault(args: argparse.Namespace) -> int:
    locker_store = store.LockerStore(_store_path(args))
    try:
        registry, run = _run_local_access(args, locker_store)
    except (store.StoreError, protocol.ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    session = run.locker.session_for(args.user)
    if session is None or session.phase is not LockerPhase.OPEN:
        return _access_exit(session, args)
    record = registry.get_record(args.user)
    key_l = protocol.locker_key(record.d_u, registry.h_r)
    try:
        if args.vault_op == "put":
            doc = Path(args.file).read_bytes()
            locker_store.vault_put(args.user, args.name, doc, key_l, session)
            _emit(args, f"stored {args.name}", {"stored": args.name})
        elif args.vault_op == "get":
            doc = locker_store.vault_get(args.user, args.name, key_l, session)
            if args.out:
                Path(args.out).write_bytes(doc)
            else:
                sys.stdout.buffer.write(doc)
                sys.stdout.buffer.flush()
        else:
            names = locker_store.vault_list(args.user, session)
            _emit(args, "\n".join(names), {"documents": names})
    except store.SessionNotOpen as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SESSION_NOT_OPEN
    except store.UnknownDocument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_DOCUMENT
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        spec = ScenarioSpec(
            scenario=args.scenario,
            seed=args.seed if args.seed is not None else 0,
            variant=args.variant,
            timeout_ms=args.timeout_ms,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    outcome, trace = sim.run_scenario(spec)
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_jsonl(), encoding="utf-8")
    matched = sim.outcome_matches_expectation(spec, outcome)
    verdict = "as-expected" if matched else "UNEXPECTED"
    _emit(
        args,
        f"{spec.scenario}: locker_opened={outcome.locker_opened} "
        f"failure={outcome.failure_reason} [{verdict}]",
        {"spec": spec.to_json(), "outcome": outcome.to_json(), "matched": matched},
    )
    return EXIT_OK if matched else EXIT_FAILURE


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the exit-code contract wants 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="digilock",
        description="Dual-key digital locker: store operations and attack simulations.",
    )
    parser.add_argument(
        "--output", choices=("text", "json"), default="text",
        help="output format (default: text)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common_store = argparse.ArgumentParser(add_help=False)
    common_store.add_argument(
        "--store", default=None,
        help=f"store directory (default: ${STORE_ENV_VAR})",
    )
    common_store.add_argument(
        "--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS,
        help="ack deadline in simulated milliseconds (default: 5000)",
    )

    p = sub.add_parser("provision", parents=[common_store],
                       help="create a registry from the provider master key")
    p.add_argument("--provider-key-file", required=True)
    p.set_defaults(func=cmd_provision)

    p = sub.add_parser("register", parents=[common_store],
                       help="register a user with a key file and secret phrase")
    p.add_argument("--user", required=True)
    p.add_argument("--key-file", required=True)
    p.add_argument("--phrase", required=True)
    p.set_defaults(func=cmd_register)

    access_args = argparse.ArgumentParser(add_help=False)
    access_args.add_argument("--user", required=True)
    access_args.add_argument("--key-file", required=True)
    access_args.add_argument("--provider-key-file", required=True)
    access_args.add_argument("--phrase", required=True)

    p = sub.add_parser("access", parents=[common_store, access_args],
                       help="run a full locker access session")
    p.set_defaults(func=cmd_access)

    p = sub.add_parser("vault", parents=[common_store, access_args],
                       help="access the locker, then run one vault operation")
    p.add_argument("vault_op", choices=("put", "get", "list"))
    p.add_argument("--name", help="document name (put/get)")
    p.add_argument("--file", help="input file (put)")
    p.add_argument("--out", help="output file (get; default stdout)")
    p.set_defaults(func=cmd_vault)

    p = sub.add_parser("simulate", help="run a named scenario in memory")
    p.add_argument(
        "--scenario", required=True, choices=sim.SCENARIO_NAMES,
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--variant", default=None,
        help="tamper target: prf-field | challenge-body | ack-digest",
    )
    p.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    p.add_argument("--trace-out", default=None, help="write JSON-lines trace here")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "timeout_ms", 1) < 1:
        parser.error("--timeout-ms must be >= 1")
    if getattr(args, "command", None) == "vault":
        if args.vault_op in ("put", "get") and not args.name:
            parser.error("vault put/get requires --name")
        if args.vault_op == "put" and not args.file:
            parser.error("vault put requires --file")
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (store.StoreError, protocol.ProtocolError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
