"""Persistence for the locker registry and the per-user document vault.

The registry is one JSON document: {"version": 1, "h_r": hex, "records":
{user id: {"d_u": hex, "sealed": {"nonce": b64, "body": b64, "tag": b64}}}}.
Vault entries are individual JSON files with base64 bodies, sealed under a
key derived from L so documents at rest stay bound to both parties' keys.
Everything here is reachable only from the locker actor; the provider seat
gets no handle to a store.
"""

from __future__ import annotations

import base64
import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import protocol
from .crypto import Ciphertext, Digest, Rng, SecretKey, seal, sha256, unseal
from .protocol import LockerPhase, LockerRecord, LockerSession
from .wire import encode_fields

REGISTRY_FILENAME = "registry.json"
VAULT_DIRNAME = "vault"
VAULT_KEY_LABEL = b"vault"
NAME_MAX = 128


class StoreError(Exception):
    """Base class for store failures."""


class AlreadyProvisioned(StoreError):
    pass


class NotProvisioned(StoreError):
    pass


class DuplicateUser(StoreError):
    pass


class UnknownUser(StoreError):
    pass


class SessionNotOpen(StoreError):
    pass


class UnknownDocument(StoreError):
    pass


def vault_key(key_l: Digest) -> Digest:
    """Storage key for a user's vault, derived from L."""
    return sha256(encode_fields([bytes(key_l), VAULT_KEY_LABEL]))


def _ct_to_json(ct: Ciphertext) -> dict:
    return {
        "nonce": base64.b64encode(ct.nonce).decode("ascii"),
        "body": base64.b64encode(ct.body).decode("ascii"),
        "tag": base64.b64encode(ct.tag).decode("ascii"),
    }


def _ct_from_json(obj: dict) -> Ciphertext:
    return Ciphertext(
        nonce=base64.b64decode(obj["nonce"]),
        body=base64.b64decode(obj["body"]),
        tag=base64.b64decode(obj["tag"]),
    )


@dataclass
class Registry:
    """The locker's registry: provider digest plus per-user records."""

    h_r: Digest
    records: dict[str, LockerRecord] = field(default_factory=dict)

    @classmethod
    def provision(cls, provider_key: SecretKey) -> "Registry":
        """Create a fresh registry holding h(R); R itself is never kept."""
        return cls(h_r=sha256(bytes(provider_key)))

    def register(
        self,
        user_id: str,
        key: SecretKey,
        phrase: str,
        *,
        rng: Rng | None = None,
    ) -> LockerRecord:
        if user_id in self.records:
            raise DuplicateUser(f"user {user_id!r} already registered")
        record = protocol.register_user(user_id, key, phrase, self.h_r, rng=rng)
        self.records[user_id] = record
        return record

    def put_record(self, record: LockerRecord) -> None:
        if record.user_id in self.records:
            raise DuplicateUser(f"user {record.user_id!r} already registered")
        self.records[record.user_id] = record

    def get_record(self, user_id: str) -> LockerRecord:
        try:
            return self.records[user_id]
        except KeyError:
            raise UnknownUser(f"no record for user {user_id!r}") from None

    def to_json(self) -> dict:
        return {
            "version": 1,
            "h_r": self.h_r.hex(),
            "records": {
                uid: {
                    "d_u": rec.d_u.hex(),
                    "sealed": _ct_to_json(rec.sealed),
                }
                for uid, rec in self.records.items()
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Registry":
        if obj.get("version") != 1:
            raise StoreError(f"unsupported registry version {obj.get('version')!r}")
        records = {
            uid: LockerRecord(
                user_id=uid,
                d_u=Digest(bytes.fromhex(rec["d_u"])),
                sealed=_ct_from_json(rec["sealed"]),
            )
            for uid, rec in obj["records"].items()
        }
        return cls(h_r=Digest(bytes.fromhex(obj["h_r"])), records=records)


def _atomic_write(path: Path, data: bytes) -> None:
    # crash between write and rename must not corrupt the previous file
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _require_open(session: LockerSession | None, user_id: str) -> None:
    if (
        session is None
        or session.phase is not LockerPhase.OPEN
        or session.user_id != user_id
    ):
        raise SessionNotOpen(f"no open session for user {user_id!r}")


class LockerStore:
    """Filesystem-backed locker state: registry file plus vault directory."""

    def __init__(
        self,
        root: str | Path,
        *,
        registry_filename: str = REGISTRY_FILENAME,
        vault_dirname: str = VAULT_DIRNAME,
    ) -> None:
        self.root = Path(root)
        self.registry_filename = registry_filename
        self.vault_dirname = vault_dirname
        self._write_lock = threading.Lock()

    @property
    def registry_path(self) -> Path:
        return self.root / self.registry_filename

    def vault_dir(self, user_id: str) -> Path:
        return self.root / self.vault_dirname / user_id.encode("utf-8").hex()

    def is_provisioned(self) -> bool:
        return self.registry_path.exists()

    def provision(self, provider_key: SecretKey) -> Registry:
        if self.is_provisioned():
            raise AlreadyProvisioned(f"registry exists at {self.registry_path}")
        registry = Registry.provision(provider_key)
        self.save_registry(registry)
        return registry

    def load_registry(self) -> Registry:
        if not self.is_provisioned():
            raise NotProvisioned(f"no registry at {self.registry_path}")
        with open(self.registry_path, "r", encoding="utf-8") as handle:
            return Registry.from_json(json.load(handle))

    def save_registry(self, registry: Registry) -> None:
        data = json.dumps(registry.to_json(), indent=2).encode("utf-8")
        with self._write_lock:
            self.root.mkdir(parents=True, exist_ok=True)
            _atomic_write(self.registry_path, data)

    def _entry_path(self, user_id: str, name: str) -> Path:
        raw = name.encode("utf-8")
        if not 1 <= len(raw) <= NAME_MAX:
            raise StoreError(f"document name must be 1-{NAME_MAX} UTF-8 bytes")
        return self.vault_dir(user_id) / (raw.hex() + ".json")

    def vault_put(
        self,
        user_id: str,
        name: str,
        doc: bytes,
        key_l: Digest,
        session: LockerSession | None,
        *,
        rng: Rng | None = None,
    ) -> None:
        _require_open(session, user_id)
        sealed = seal(vault_key(key_l), doc, rng)
        entry = {
            "version": 1,
            "user_id": user_id,
            "name": name,
            "sealed": _ct_to_json(sealed),
        }
        path = self._entry_path(user_id, name)
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(path, json.dumps(entry, indent=2).encode("utf-8"))

    def vault_get(
        self,
        user_id: str,
        name: str,
        key_l: Digest,
        session: LockerSession | None,
    ) -> bytes:
        _require_open(session, user_id)
        path = self._entry_path(user_id, name)
        if not path.exists():
            raise UnknownDocument(f"no document {name!r} for user {user_id!r}")
        with open(path, "r", encoding="utf-8") as handle:
            entry = json.load(handle)
        return unseal(vault_key(key_l), _ct_from_json(entry["sealed"]))

    def vault_list(
        self, user_id: str, session: LockerSession | None
    ) -> list[str]:
        _require_open(session, user_id)
        directory = self.vault_dir(user_id)
        if not directory.exists():
            return []
        names = []
        for path in sorted(directory.glob("*.json")):
            with open(path, "r", encoding="utf-8") as handle:
                names.append(json.load(handle)["name"])
        return names
