"""Research exports: raw CSV of the per-node logs and bucketed Leq tables."""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Any

from ..client import RtdbClient
from ..dsp.blocks import leq

CSV_HEADER = ["node_id", "ts", "lat", "lon", "spl_db", "seq"]


def _log_rows(tree: Any, ts_from: int | None, ts_to: int | None) -> list[dict]:
    """Flatten /nodes/*/log/* into rows sorted by (node_id, seq)."""
    rows: list[dict] = []
    if not isinstance(tree, dict):
        return rows
    for node_id in sorted(tree):
        node = tree[node_id]
        if not isinstance(node, dict):
            continue
        entries = node.get("log")
        if not isinstance(entries, dict):
            continue
        keyed = []
        for key, entry in entries.items():
            if not isinstance(entry, dict):
                continue
            try:
                seq = int(key)
            except ValueError:
                continue
            keyed.append((seq, entry))
        for seq, entry in sorted(keyed):
            ts = entry.get("ts")
            if not isinstance(ts, int):
                continue
            if ts_from is not None and ts < ts_from:
                continue
            if ts_to is not None and ts > ts_to:
                continue
            rows.append(
                {
                    "node_id": node_id,
                    "ts": ts,
                    "lat": entry.get("lat"),
                    "lon": entry.get("lon"),
                    "spl_db": entry.get("spl_db"),
                    "seq": seq,
                }
            )
    return rows


def export_csv(
    client: RtdbClient,
    out_path: str | Path,
    ts_from: int | None = None,
    ts_to: int | None = None,
) -> int:
    """Write the research CSV atomically; returns the data row count.

    The store is read before any file is touched, so an unreachable
    server never leaves a partial file behind.
    """
    tree = client.get("/nodes")
    rows = _log_rows(tree, ts_from, ts_to)
    out_path = Path(out_path)
    tmp = out_path.with_name(out_path.name + f".tmp-{os.getpid()}")
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp, out_path)
    finally:
        tmp.unlink(missing_ok=True)
    return len(rows)


def leq_summary(
    client: RtdbClient,
    bucket_ms: int,
    ts_from: int | None = None,
    ts_to: int | None = None,
) -> list[dict]:
    """Per-node, per-bucket equivalent level; empty buckets are omitted."""
    if bucket_ms <= 0:
        raise ValueError("bucket_ms must be positive")
    rows = _log_rows(client.get("/nodes"), ts_from, ts_to)
    if not rows:
        return []
    origin = ts_from if ts_from is not None else min(r["ts"] for r in rows)
    buckets: dict[tuple[str, int], list[float]] = {}
    for row in rows:
        if not isinstance(row["spl_db"], (int, float)):
            continue
        start = origin + ((row["ts"] - origin) // bucket_ms) * bucket_ms
        buckets.setdefault((row["node_id"], start), []).append(float(row["spl_db"]))
    out = []
    for (node_id, start), levels in sorted(buckets.items()):
        out.append(
            {
                "node_id": node_id,
                "bucket_start_ms": start,
                "leq_db": round(leq(levels), 2),
                "count": len(levels),
            }
        )
    return out
