"""User profile records persisted as one JSON array on disk.

A profile names the user, the task label their classifier emits, the
activity/key binding, a default threshold, and whether training has been
completed. Writes go through a temp file and os.replace so a crash cannot
leave a half-written store.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from mindbridge.engine import THRESHOLD_MAX, THRESHOLD_MIN, CommandBinding


class ProfileStoreError(Exception):
    pass


class ProfileNotFound(ProfileStoreError):
    def __init__(self, name: str) -> None:
        super().__init__(f"no profile named {name!r}")
        self.name = name


class DuplicateName(ProfileStoreError):
    def __init__(self, name: str) -> None:
        super().__init__(f"profile {name!r} already exists")
        self.name = name


class StoreIO(ProfileStoreError):
    """The backing file cannot be read or written."""


@dataclass(frozen=True)
class ProfileRecord:
    name: str
    task_name: str
    binding: CommandBinding
    default_threshold: int = 5
    trained: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("profile needs a name")
        if not self.task_name or self.task_name == "neutral":
            raise ValueError("task name must be non-empty and not 'neutral'")
        if not THRESHOLD_MIN <= self.default_threshold <= THRESHOLD_MAX:
            raise ValueError(
                f"default threshold must be in [{THRESHOLD_MIN}, {THRESHOLD_MAX}]"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "taskName": self.task_name,
            "binding": {
                "activity": self.binding.activity,
                "onKey": self.binding.on_key,
            },
            "defaultThreshold": self.default_threshold,
            "trained": self.trained,
        }

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> "ProfileRecord":
        try:
            return ProfileRecord(
                name=doc["name"],
                task_name=doc["taskName"],
                binding=CommandBinding(
                    activity=doc["binding"]["activity"],
                    on_key=doc["binding"]["onKey"],
                ),
                default_threshold=doc.get("defaultThreshold", 5),
                trained=bool(doc.get("trained", False)),
            )
        except (KeyError, TypeError) as exc:
            raise StoreIO(f"bad profile record: {exc}") from exc


class ProfileStore:
    """All profiles live in one JSON array file, loaded eagerly."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._records: dict[str, ProfileRecord] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        try:
            doc = json.loads(self.path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise StoreIO(f"cannot read profile store: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise StoreIO(f"profile store is not JSON: {exc}") from exc
        if not isinstance(doc, list):
            raise StoreIO("profile store must be a JSON array")
        for entry in doc:
            if not isinstance(entry, dict):
                raise StoreIO("profile entries must be objects")
            record = ProfileRecord.from_dict(entry)
            self._records[record.name] = record

    def _flush(self) -> None:
        payload = json.dumps(
            [rec.to_dict() for rec in self._records.values()], indent=2
        )
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(
                dir=self.path.parent, prefix=self.path.name, suffix=".tmp"
            )
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(payload + "\n")
                os.replace(tmp, self.path)
            except BaseException:
                os.unlink(tmp)
                raise
        except OSError as exc:
            raise StoreIO(f"cannot write profile store: {exc}") from exc

    def list(self) -> list[ProfileRecord]:
        return sorted(self._records.values(), key=lambda r: r.name)

    def get(self, name: str) -> ProfileRecord:
        try:
            return self._records[name]
        except KeyError:
            raise ProfileNotFound(name) from None

    def create(self, record: ProfileRecord) -> None:
        if record.name in self._records:
            raise DuplicateName(record.name)
        self._records[record.name] = record
        self._flush()

    def upsert(self, record: ProfileRecord) -> bool:
        """Create or replace; returns True when the profile already existed."""
        existed = record.name in self._records
        self._records[record.name] = record
        self._flush()
        return existed

    def mark_trained(self, name: str) -> ProfileRecord:
        record = replace(self.get(name), trained=True)
        self._records[name] = record
        self._flush()
        return record

    def delete(self, name: str) -> None:
        if name not in self._records:
            raise ProfileNotFound(name)
        del self._records[name]
        self._flush()
