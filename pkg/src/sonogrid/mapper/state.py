"""Latest-per-node registry folded from store change events.

The registry never crashes on a malformed payload: rejects are counted
and the previous good state stays. Log-branch events are irrelevant to
live state and are skipped outright.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Any, Iterable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeState:
    node_id: str
    lat: float
    lon: float
    spl_db: float
    ts: int
    last_seen_ms: int
    seq: int | None = None

    def is_stale(self, now_ms: int, stale_after_ms: int) -> bool:
        return now_ms - self.last_seen_ms > stale_after_ms

    def to_json(self, now_ms: int, stale_after_ms: int) -> dict[str, Any]:
        return {
            "node_id": self.node_id,
            "lat": self.lat,
            "lon": self.lon,
            "spl_db": self.spl_db,
            "ts": self.ts,
            "seq": self.seq,
            "last_seen": self.last_seen_ms,
            "stale": self.is_stale(now_ms, stale_after_ms),
        }


def _segments(path: str) -> list[str]:
    return [s for s in path.split("/") if s]


class NodeRegistry:
    """Thread-safe fold of events rooted at /nodes into NodeState values."""

    def __init__(self, value_floor_db: float = 30.0, value_ceiling_db: float = 120.0):
        self.value_floor_db = value_floor_db
        self.value_ceiling_db = value_ceiling_db
        self._lock = threading.Lock()
        self._states: dict[str, NodeState] = {}
        self._raw_latest: dict[str, Any] = {}
        self.events_seen = 0
        self.rejected = 0

    # -- event folding --------------------------------------------------------

    def apply_event(self, kind: str, path: str, data: Any, now_ms: int) -> list[str]:
        """Fold one event; returns node ids whose state changed (or vanished)."""
        with self._lock:
            self.events_seen += 1
            puts = self._as_puts(kind, path, data)
            changed: list[str] = []
            for segs, value in puts:
                changed.extend(self._apply_put(segs, value, now_ms))
            return changed

    @staticmethod
    def _as_puts(kind: str, path: str, data: Any) -> list[tuple[list[str], Any]]:
        """Patches are per-key child replacements, so expand them to puts."""
        segs = _segments(path)
        if kind == "put":
            return [(segs, data)]
        if not isinstance(data, dict):
            return []
        return [(segs + [key], value) for key, value in data.items()]

    def _apply_put(self, segs: list[str], value: Any, now_ms: int) -> list[str]:
        if not segs:
            return self._replace_all(value, now_ms)
        node_id = segs[0]
        rest = segs[1:]
        if not rest:
            if value is None:
                return self._remove(node_id)
            if isinstance(value, dict):
                return self._set_raw(node_id, value.get("latest"), now_ms)
            return self._remove(node_id)
        if rest[0] == "log":
            return []
        if rest[0] != "latest":
            return []
        below = rest[1:]
        if not below:
            return self._set_raw(node_id, value, now_ms)
        # partial field write below /latest: merge into the raw mirror
        raw = self._raw_latest.get(node_id)
        raw = dict(raw) if isinstance(raw, dict) else {}
        node = raw
        for seg in below[:-1]:
            nxt = node.get(seg)
            node[seg] = dict(nxt) if isinstance(nxt, dict) else {}
            node = node[seg]
        if value is None:
            node.pop(below[-1], None)
        else:
            node[below[-1]] = value
        return self._set_raw(node_id, raw, now_ms)

    def _replace_all(self, value: Any, now_ms: int) -> list[str]:
        previous = set(self._states)
        self._states.clear()
        self._raw_latest.clear()
        changed = set(previous)
        if isinstance(value, dict):
            for node_id, node_value in value.items():
                if isinstance(node_value, dict):
                    self._set_raw(node_id, node_value.get("latest"), now_ms)
                    if node_id in self._states:
                        changed.add(node_id)
        return sorted(changed)

    def _remove(self, node_id: str) -> list[str]:
        self._raw_latest.pop(node_id, None)
        if self._states.pop(node_id, None) is not None:
            return [node_id]
        return []

    def _set_raw(self, node_id: str, raw: Any, now_ms: int) -> list[str]:
        if raw is None:
            return self._remove(node_id)
        state = self._parse(node_id, raw, now_ms)
        if state is None:
            self.rejected += 1
            log.debug("rejected malformed reading for %s: %r", node_id, raw)
            return []
        self._raw_latest[node_id] = raw
        self._states[node_id] = state
        return [node_id]

    def _parse(self, node_id: str, raw: Any, now_ms: int) -> NodeState | None:
        if not isinstance(raw, dict):
            return None
        lat = raw.get("lat")
        lon = raw.get("lon")
        spl = raw.get("spl_db")
        ts = raw.get("ts")
        seq = raw.get("seq")
        if not isinstance(lat, (int, float)) or isinstance(lat, bool) or not -90 <= lat <= 90:
            return None
        if not isinstance(lon, (int, float)) or isinstance(lon, bool) or not -180 <= lon <= 180:
            return None
        if not isinstance(spl, (int, float)) or isinstance(spl, bool):
            return None
        if not self.value_floor_db <= spl <= self.value_ceiling_db:
            return None
        if not isinstance(ts, int) or isinstance(ts, bool):
            return None
        if "node_id" in raw and raw["node_id"] != node_id:
            return None
        if seq is not None and (not isinstance(seq, int) or isinstance(seq, bool)):
            return None
        return NodeState(
            node_id=node_id,
            lat=float(lat),
            lon=float(lon),
            spl_db=float(spl),
            ts=ts,
            last_seen_ms=now_ms,
            seq=seq,
        )

    # -- queries ---------------------------------------------------------------

    def states(self) -> list[NodeState]:
        with self._lock:
            return sorted(self._states.values(), key=lambda s: s.node_id)

    def state_of(self, node_id: str) -> NodeState | None:
        with self._lock:
            return self._states.get(node_id)

    def live(self, now_ms: int, stale_after_ms: int) -> list[NodeState]:
        return [s for s in self.states() if not s.is_stale(now_ms, stale_after_ms)]

    def metrics(self) -> dict[str, int]:
        with self._lock:
            return {
                "events": self.events_seen,
                "rejected": self.rejected,
                "nodes": len(self._states),
            }
