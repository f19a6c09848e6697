"""Append-only NDJSON write journal with per-record CRC32.

Human-inspectable and trivially replayable: one JSON object per line
carrying {seq, verb, path, body, ts, crc}. ``verb`` is put, patch, or
snapshot (the record compaction leaves behind). A torn trailing record
is discarded on recovery; a corrupt interior record aborts startup.
"""

from __future__ import annotations

import json
import logging
import os
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from ..errors import JournalCorruptError
from . import tree

log = logging.getLogger(__name__)

VERBS = ("put", "patch", "snapshot")


@dataclass(frozen=True)
class JournalRecord:
    seq: int
    verb: str
    path: str
    body: Any
    ts: int

    def payload_bytes(self) -> bytes:
        payload = {
            "seq": self.seq,
            "verb": self.verb,
            "path": self.path,
            "body": self.body,
            "ts": self.ts,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def encode(self) -> bytes:
        crc = zlib.crc32(self.payload_bytes())
        line = {
            "seq": self.seq,
            "verb": self.verb,
            "path": self.path,
            "body": self.body,
            "ts": self.ts,
            "crc": crc,
        }
        return json.dumps(line, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_line(line: bytes) -> JournalRecord:
    """Parse and CRC-check one journal line; raises ValueError when damaged."""
    obj = json.loads(line.decode("utf-8"))
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    try:
        crc = obj.pop("crc")
        record = JournalRecord(
            seq=obj["seq"], verb=obj["verb"], path=obj["path"], body=obj["body"], ts=obj["ts"]
        )
    except KeyError as exc:
        raise ValueError(f"record missing field {exc}") from None
    if record.verb not in VERBS:
        raise ValueError(f"unknown verb {record.verb!r}")
    if zlib.crc32(record.payload_bytes()) != crc:
        raise ValueError("crc mismatch")
    return record


class JournalWriter:
    """Appends committed records; flush (and optionally fsync) before ack."""

    def __init__(self, path: str | Path, fsync: bool = True):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "ab")
        self.fsync = fsync

    def append(self, record: JournalRecord) -> None:
        self._fh.write(record.encode())
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
            self._fh.close()


def read_journal(path: str | Path) -> list[JournalRecord]:
    """Load committed records, discarding a torn trailing one.

    A damaged record followed by valid data means real corruption, not a
    torn write, and raises JournalCorruptError with the line number.
    """
    raw = Path(path).read_bytes()
    lines = raw.split(b"\n")
    # a trailing newline yields one empty tail entry; anything else after
    # the last newline is a potentially torn record
    records: list[JournalRecord] = []
    bad: tuple[int, str] | None = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if bad is not None:
            raise JournalCorruptError(
                f"{path}: line {bad[0]}: {bad[1]} (followed by more records)"
            )
        try:
            records.append(decode_line(line))
        except ValueError as exc:
            bad = (lineno, str(exc))
    if bad is not None:
        log.warning("%s: dropped torn trailing record at line %d (%s)", path, bad[0], bad[1])
    return records


def replay(records: Iterable[JournalRecord]) -> tuple[Any, int]:
    """Fold records into (tree root, last seq). Snapshot records reset the tree."""
    root: Any = None
    last_seq = 0
    for rec in records:
        if rec.verb == "snapshot":
            root = rec.body
        elif rec.verb == "put":
            root = tree.put_at(root, tree.parse_path(rec.path), rec.body)
        elif rec.verb == "patch":
            root = tree.apply_patch(root, tree.parse_path(rec.path), rec.body)
        last_seq = max(last_seq, rec.seq)
    return root, last_seq
