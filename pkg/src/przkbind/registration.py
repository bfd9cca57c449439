"""Credential-authority role: mint binding records and persist the registry.

The authority participates at initialization only. It binds a physical
public key, a twin public key, and a trusted timestamp into a digest
``zeta`` that both parties later use as their shared session context;
live sessions never consult the registry again.

Registry file format: one JSON object per line with keys ``pk_p``,
``pk_d``, ``t``, ``zeta``; group elements and digests hex-encoded with
the group's canonical encodings, ``t`` an unsigned 64-bit integer.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple, Union

from .groups import Element, Group, GroupError, hash_h2

_MAX_T = 2**64 - 1


class RegistrationError(ValueError):
    """Invalid registration input (degenerate key, duplicate pair, bad t)."""


class RegistryIOError(ValueError):
    """Registry file is unreadable or fails integrity validation."""


@dataclass(frozen=True)
class BindingRecord:
    """One issued binding: the two public keys, the timestamp, and zeta."""

    pk_p: Element
    pk_d: Element
    t: int
    zeta: bytes


def encode_timestamp(t: int) -> bytes:
    if not 0 <= t <= _MAX_T:
        raise RegistrationError(f"timestamp out of unsigned 64-bit range: {t}")
    return struct.pack(">Q", t)


def compute_zeta(group: Group, pk_p: Element, pk_d: Element, t: int) -> bytes:
    """Binding digest over the canonical encodings of (pk_p, pk_d, t)."""
    return hash_h2(group.encode(pk_p), group.encode(pk_d), encode_timestamp(t))


def verify_record(group: Group, rec: BindingRecord) -> bool:
    """True iff the stored zeta matches a recomputation from the record."""
    try:
        return rec.zeta == compute_zeta(group, rec.pk_p, rec.pk_d, rec.t)
    except (GroupError, RegistrationError):
        return False


class Registry:
    """In-memory set of binding records, one per (pk_p, pk_d) pair."""

    def __init__(self, group: Group, storage_path: Optional[Path] = None):
        self.group = group
        self.storage_path = storage_path
        self._records: Dict[Tuple[bytes, bytes], BindingRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[BindingRecord]:
        return iter(self._records.values())

    def register(self, pk_p: Element, pk_d: Element, t: int) -> BindingRecord:
        """Mint and store the binding record for a new (pk_p, pk_d) pair."""
        for name, pk in (("pk_p", pk_p), ("pk_d", pk_d)):
            if not self.group.is_member(pk):
                raise RegistrationError(f"{name} is not a group member")
            if pk == self.group.identity:
                raise RegistrationError(f"{name} must not be the identity element")
        key = (self.group.encode(pk_p), self.group.encode(pk_d))
        if key in self._records:
            raise RegistrationError("already bound")
        rec = BindingRecord(pk_p, pk_d, t, compute_zeta(self.group, pk_p, pk_d, t))
        self._records[key] = rec
        return rec

    def get(self, pk_p: Element, pk_d: Element) -> Optional[BindingRecord]:
        return self._records.get((self.group.encode(pk_p), self.group.encode(pk_d)))

    def add(self, rec: BindingRecord) -> None:
        """Insert an already-minted record (used by load); validates it."""
        if not verify_record(self.group, rec):
            raise RegistryIOError("record fails zeta recomputation")
        key = (self.group.encode(rec.pk_p), self.group.encode(rec.pk_d))
        if key in self._records:
            raise RegistrationError("already bound")
        self._records[key] = rec


def _record_to_json(group: Group, rec: BindingRecord) -> str:
    return json.dumps(
        {
            "pk_p": group.encode(rec.pk_p).hex(),
            "pk_d": group.encode(rec.pk_d).hex(),
            "t": rec.t,
            "zeta": rec.zeta.hex(),
        }
    )


def _record_from_json(group: Group, line: str) -> BindingRecord:
    obj = json.loads(line)
    missing = {"pk_p", "pk_d", "t", "zeta"} - obj.keys()
    if missing:
        raise ValueError(f"missing keys: {sorted(missing)}")
    t = obj["t"]
    if not isinstance(t, int):
        raise ValueError("t must be an integer")
    return BindingRecord(
        pk_p=group.decode(bytes.fromhex(obj["pk_p"])),
        pk_d=group.decode(bytes.fromhex(obj["pk_d"])),
        t=t,
        zeta=bytes.fromhex(obj["zeta"]),
    )


def save_registry(registry: Registry, path: Union[str, Path]) -> None:
    path = Path(path)
    lines = [_record_to_json(registry.group, rec) for rec in registry]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    registry.storage_path = path


def load_registry(group: Group, path: Union[str, Path]) -> Registry:
    """Load and validate a registry; names the offending record on error."""
    path = Path(path)
    registry = Registry(group, storage_path=path)
    with open(path, "r", encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                rec = _record_from_json(group, line)
            except (ValueError, GroupError) as exc:
                raise RegistryIOError(f"record {index}: {exc}") from exc
            if not verify_record(group, rec):
                raise RegistryIOError(f"record {index}: zeta does not match its fields")
            registry.add(rec)
    return registry
