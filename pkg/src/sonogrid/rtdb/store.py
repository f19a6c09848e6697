"""The tree store: one total-order commit lane, snapshot reads, fenced streams.

All mutations serialize through a single lock that assigns the global
sequence number, journals the record, swaps in the new immutable root,
and fans the event out to every overlapping subscription. Reads take the
current root reference without locking; subscribing snapshots and
registers atomically, so a subscriber's first (synthetic) event fences
exactly against the stream that follows.
"""

from __future__ import annotations

import hmac
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from ..errors import AuthError, StreamOverflow, ValidationError
from . import tree
from .journal import JournalRecord, JournalWriter, read_journal, replay

DEFAULT_BUFFER_SIZE = 10_000

_CLOSED = object()
_OVERFLOW = object()
#: omitted-token marker: in-process callers that own the store are trusted,
#: while an explicit None (e.g. a request without credentials) is rejected
_TRUSTED = object()


@dataclass(frozen=True)
class Event:
    """One change, relative to a subscription root."""

    seq: int
    kind: str  # "put" | "patch"
    path: str
    data: Any


class Subscription:
    """Bounded event buffer for one consumer.

    Overflowing consumers get the contiguous prefix they already have,
    then a StreamOverflow; they must resubscribe for a fresh snapshot.
    """

    def __init__(self, segments: tree.Segments, buffer_size: int):
        self.segments = segments
        self.buffer_size = buffer_size
        # +1 reserves a slot for the overflow/closed marker
        self._queue: queue.Queue = queue.Queue(maxsize=buffer_size + 1)
        self._lock = threading.Lock()
        self._overflowed = False
        self._closed = False

    def _offer(self, event: Event) -> None:
        with self._lock:
            if self._closed or self._overflowed:
                return
            if self._queue.qsize() >= self.buffer_size:
                self._overflowed = True
                self._queue.put_nowait(_OVERFLOW)
                return
            self._queue.put_nowait(event)

    def _close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            if not self._overflowed:
                self._queue.put_nowait(_CLOSED)

    def get(self, timeout: float | None = None) -> Event | None:
        """Next event; None on timeout (keep-alive tick); StreamOverflow when behind."""
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        if item is _OVERFLOW:
            raise StreamOverflow(f"subscriber exceeded {self.buffer_size} buffered events")
        if item is _CLOSED:
            raise StopIteration
        return item

    def events(self) -> Iterator[Event]:
        """Blocking iterator; ends on close, raises StreamOverflow when behind."""
        while True:
            try:
                event = self.get(timeout=None)
            except StopIteration:
                return
            if event is not None:
                yield event


class Store:
    def __init__(
        self,
        token: str,
        journal_path: str | Path | None = None,
        buffer_size: int = DEFAULT_BUFFER_SIZE,
        fsync: bool = True,
    ):
        if not token:
            raise ValidationError("auth token must be non-empty")
        self.token = token
        self.buffer_size = buffer_size
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []
        self._root: Any = None
        self._seq = 0
        self._journal: JournalWriter | None = None
        if journal_path is not None:
            journal_path = Path(journal_path)
            if journal_path.exists():
                self._root, self._seq = replay(read_journal(journal_path))
            self._journal = JournalWriter(journal_path, fsync=fsync)

    # -- auth ---------------------------------------------------------------

    def check_token(self, token: Any) -> None:
        if not isinstance(token, str) or not hmac.compare_digest(token, self.token):
            raise AuthError("unauthorized")

    # -- reads --------------------------------------------------------------

    def get(self, path: str, token: Any = _TRUSTED) -> Any:
        self.check_token(self.token if token is _TRUSTED else token)
        segments = tree.parse_path(path)
        return tree.get_at(self._root, segments)

    @property
    def seq(self) -> int:
        return self._seq

    # -- writes -------------------------------------------------------------

    def put(self, path: str, value: Any, token: Any = _TRUSTED) -> int:
        self.check_token(self.token if token is _TRUSTED else token)
        segments = tree.parse_path(path)
        tree.validate_value(value, tree.MAX_DEPTH - len(segments))
        norm = tree.normalize(value)
        with self._lock:
            seq = self._seq + 1
            new_root = tree.put_at(self._root, segments, norm)
            self._append_journal(seq, "put", segments, norm)
            self._seq = seq
            self._root = new_root
            self._fanout(seq, "put", segments, norm)
        return seq

    def patch(self, path: str, fields: Any, token: Any = _TRUSTED) -> int:
        self.check_token(self.token if token is _TRUSTED else token)
        segments = tree.parse_path(path)
        if not isinstance(fields, dict):
            raise ValidationError("patch body must be a JSON object")
        norm_fields: dict[str, Any] = {}
        for key, value in fields.items():
            if not isinstance(key, str) or not tree.SEGMENT_RE.match(key):
                raise ValidationError(f"bad object key {key!r}")
            tree.validate_value(value, tree.MAX_DEPTH - len(segments) - 1)
            norm_fields[key] = tree.normalize(value)
        with self._lock:
            seq = self._seq + 1
            new_root = tree.apply_patch(self._root, segments, norm_fields)
            self._append_journal(seq, "patch", segments, norm_fields)
            self._seq = seq
            self._root = new_root
            self._fanout(seq, "patch", segments, norm_fields)
        return seq

    def delete(self, path: str, token: Any = _TRUSTED) -> int:
        return self.put(path, None, token=token)

    def _append_journal(self, seq: int, verb: str, segments: tree.Segments, body: Any) -> None:
        if self._journal is not None:
            self._journal.append(
                JournalRecord(
                    seq=seq,
                    verb=verb,
                    path=tree.join_path(segments),
                    body=body,
                    ts=int(time.time() * 1000),
                )
            )

    # -- events -------------------------------------------------------------

    def subscribe(self, path: str, token: Any = _TRUSTED) -> Subscription:
        """Register a stream; its first event is a snapshot put at '/'.

        Registration shares the commit lock, so nothing is lost or doubled
        between the snapshot and the live events that follow it.
        """
        self.check_token(self.token if token is _TRUSTED else token)
        segments = tree.parse_path(path)
        sub = Subscription(segments, self.buffer_size)
        with self._lock:
            snapshot = tree.get_at(self._root, segments)
            sub._offer(Event(seq=self._seq, kind="put", path="/", data=snapshot))
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)
        sub._close()

    def _fanout(self, seq: int, verb: str, segments: tree.Segments, body: Any) -> None:
        for sub in self._subs:
            event = _relativize(sub.segments, seq, verb, segments, body)
            if event is not None:
                sub._offer(event)

    # -- maintenance ----------------------------------------------------------

    def compact(self) -> None:
        """Rewrite the journal as one snapshot record; a crash keeps the old file."""
        if self._journal is None:
            return
        with self._lock:
            path = self._journal.path
            tmp = path.with_suffix(path.suffix + ".compact")
            writer = JournalWriter(tmp, fsync=True)
            try:
                writer.append(
                    JournalRecord(
                        seq=self._seq,
                        verb="snapshot",
                        path="/",
                        body=self._root,
                        ts=int(time.time() * 1000),
                    )
                )
                writer.close()
            except Exception:
                writer.close()
                tmp.unlink(missing_ok=True)
                raise
            self._journal.close()
            tmp.replace(path)
            self._journal = JournalWriter(path, fsync=self._journal.fsync)

    def close(self) -> None:
        with self._lock:
            subs = list(self._subs)
            self._subs.clear()
        for sub in subs:
            sub._close()
        if self._journal is not None:
            self._journal.close()


def _relativize(
    sub_segments: tree.Segments,
    seq: int,
    verb: str,
    write_segments: tree.Segments,
    body: Any,
) -> Event | None:
    """Map one committed write onto a subscription's coordinate frame.

    Writes at or below the subscription root pass through with a
    relativized path. Writes strictly above it re-root: the subscriber
    sees a put at '/' carrying its new subtree (patches contribute only
    the field covering the subscription branch, if any).
    """
    n = len(sub_segments)
    if write_segments[:n] == sub_segments:
        rel = write_segments[n:]
        return Event(seq=seq, kind=verb, path=tree.join_path(rel), data=body)
    if sub_segments[: len(write_segments)] == write_segments:
        descend = sub_segments[len(write_segments) :]
        if verb == "put":
            return Event(seq=seq, kind="put", path="/", data=tree.get_at(body, descend))
        # patch above the subscription: only the matching key reaches it
        key = descend[0]
        if not isinstance(body, dict) or key not in body:
            return None
        return Event(
            seq=seq, kind="put", path="/", data=tree.get_at(body[key], descend[1:])
        )
    return None
