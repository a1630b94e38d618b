"""Versioned wrapper persistence.

Layout: one directory per wrapper name holding v<N>.json content files
plus an append-only log.jsonl of version records.  The log is the source
of truth; content files are verified against the recorded digest on
checkout.  Linear history only: a commit must carry exactly
latest-version-plus-one, anything else is a ConflictError and the caller
rebases on latest.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from wrapmend.model import Wrapper, WrapperFormatError, wrapper_from_dict, wrapper_json


class StorageError(Exception):
    pass


class ConflictError(StorageError):
    """Committed version is not latest + 1."""


class NotFoundError(StorageError):
    """Unknown wrapper name or version."""


class CorruptionError(StorageError):
    """Stored content no longer matches its recorded digest."""


@dataclass(frozen=True)
class VersionRecord:
    version: int
    parent_version: Optional[int]
    timestamp: str
    change_summary: tuple  # of (rule_name, trigger, one-line delta)
    content_digest: str

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "parent_version": self.parent_version,
            "timestamp": self.timestamp,
            "change_summary": [
                {"rule": r, "trigger": t, "delta": d} for r, t, d in self.change_summary
            ],
            "content_digest": self.content_digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VersionRecord":
        return cls(
            version=d["version"],
            parent_version=d.get("parent_version"),
            timestamp=d.get("timestamp", ""),
            change_summary=tuple(
                (e["rule"], e["trigger"], e["delta"]) for e in d.get("change_summary", ())
            ),
            content_digest=d["content_digest"],
        )


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class WrapperStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, name: str) -> Path:
        if not name or name in (".", "..") or "/" in name or os.sep in name:
            raise StorageError("bad wrapper name %r" % (name,))
        return self.root / name

    def _read_log(self, name: str) -> list:
        log = self._dir(name) / "log.jsonl"
        if not log.exists():
            raise NotFoundError("no wrapper named %r" % (name,))
        records = []
        with open(log, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(VersionRecord.from_dict(json.loads(line)))
        if not records:
            raise NotFoundError("no wrapper named %r" % (name,))
        return records

    def commit(self, wrapper: Wrapper, summary=(), timestamp=None) -> VersionRecord:
        """Persist one new version; wrapper.version must be latest + 1."""
        wdir = self._dir(wrapper.name)
        wdir.mkdir(parents=True, exist_ok=True)
        lock_path = wdir / ".lock"
        with open(lock_path, "w") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            try:
                try:
                    records = self._read_log(wrapper.name)
                    latest = records[-1].version
                    parent = latest
                except NotFoundError:
                    latest = 0
                    parent = None
                if wrapper.version != latest + 1:
                    raise ConflictError(
                        "expected version %d, got %d" % (latest + 1, wrapper.version)
                    )
                content = wrapper_json(wrapper).encode("utf-8")
                record = VersionRecord(
                    version=wrapper.version,
                    parent_version=parent,
                    timestamp=timestamp
                    or datetime.now(timezone.utc).isoformat(timespec="seconds"),
                    change_summary=tuple(tuple(entry) for entry in summary),
                    content_digest=_digest(content),
                )
                # content first, then the log line that makes it visible
                tmp = wdir / ("v%d.json.tmp" % wrapper.version)
                with open(tmp, "wb") as fh:
                    fh.write(content)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, wdir / ("v%d.json" % wrapper.version))
                with open(wdir / "log.jsonl", "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                return record
            finally:
                fcntl.flock(lock, fcntl.LOCK_UN)

    def checkout(self, name: str, version="latest") -> Wrapper:
        records = self._read_log(name)
        if version == "latest":
            record = records[-1]
        else:
            matches = [r for r in records if r.version == version]
            if not matches:
                raise NotFoundError("wrapper %r has no version %r" % (name, version))
            record = matches[0]
        path = self._dir(name) / ("v%d.json" % record.version)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise CorruptionError("content file missing for %s v%d" % (name, record.version))
        if _digest(data) != record.content_digest:
            raise CorruptionError(
                "digest mismatch for %s v%d" % (name, record.version)
            )
        try:
            return wrapper_from_dict(json.loads(data.decode("utf-8")))
        except (json.JSONDecodeError, WrapperFormatError) as e:
            raise CorruptionError("unreadable content for %s v%d: %s" % (name, record.version, e))

    def history(self, name: str) -> list:
        return self._read_log(name)

    def names(self) -> list:
        """Wrapper names present in the store, sorted."""
        if not self.root.exists():
            return []
        return sorted(
            p.name for p in self.root.iterdir() if (p / "log.jsonl").exists()
        )
