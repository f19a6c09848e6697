"""Path parsing and persistent (copy-on-write) JSON tree operations.

The value model is objects, strings, numbers and booleans; null means
absent, and empty objects are never stored (writing one prunes the
branch). Tree nodes are never mutated in place, so any captured root is
a consistent snapshot forever.
"""

from __future__ import annotations

import math
import re
from typing import Any

from ..errors import ValidationError

SEGMENT_RE = re.compile(r"^[A-Za-z0-9_-]+$")
MAX_DEPTH = 32

Segments = tuple[str, ...]


def parse_path(raw: str) -> Segments:
    """Canonical form '/a/b/c'; root is '/'. Segments are charset-checked."""
    if not isinstance(raw, str) or not raw.startswith("/"):
        raise ValidationError(f"path must start with '/': {raw!r}")
    if raw == "/":
        return ()
    parts = raw[1:].rstrip("/").split("/") if raw != "/" else []
    segments = tuple(parts)
    if len(segments) > MAX_DEPTH:
        raise ValidationError(f"path deeper than {MAX_DEPTH}: {raw!r}")
    for seg in segments:
        if not SEGMENT_RE.match(seg):
            raise ValidationError(f"bad path segment {seg!r}")
    return segments


def join_path(segments: Segments) -> str:
    return "/" + "/".join(segments)


def validate_value(value: Any, max_depth: int) -> None:
    """Reject arrays, non-finite numbers, bad keys, and over-deep nesting."""
    if value is None or isinstance(value, (str, bool, int)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValidationError("non-finite numbers are not valid JSON")
        return
    if isinstance(value, dict):
        if max_depth <= 0:
            raise ValidationError(f"value nests deeper than {MAX_DEPTH} total levels")
        for key, child in value.items():
            if not isinstance(key, str) or not SEGMENT_RE.match(key):
                raise ValidationError(f"bad object key {key!r}")
            validate_value(child, max_depth - 1)
        return
    raise ValidationError(f"unsupported JSON value of type {type(value).__name__}")


def normalize(value: Any) -> Any:
    """Drop null children and empty objects; an empty result is None.

    Always builds fresh dicts, so normalized values never alias caller
    input.
    """
    if isinstance(value, dict):
        out = {}
        for key, child in value.items():
            norm = normalize(child)
            if norm is not None:
                out[key] = norm
        return out or None
    return value


def get_at(root: Any, segments: Segments) -> Any:
    """Subtree at path, or None when absent (including below a scalar)."""
    node = root
    for seg in segments:
        if not isinstance(node, dict):
            return None
        node = node.get(seg)
        if node is None:
            return None
    return node


def put_at(root: Any, segments: Segments, value: Any) -> Any:
    """Replace the subtree at path; value=None deletes. Returns the new root."""
    if value is None:
        return delete_at(root, segments)
    if not segments:
        return value
    head, rest = segments[0], segments[1:]
    base = dict(root) if isinstance(root, dict) else {}
    base[head] = put_at(base.get(head), rest, value)
    return base


def delete_at(root: Any, segments: Segments) -> Any:
    """Remove the subtree at path, pruning emptied ancestors."""
    if not segments:
        return None
    if not isinstance(root, dict):
        return root
    head, rest = segments[0], segments[1:]
    if head not in root:
        return root
    child = delete_at(root[head], rest)
    base = dict(root)
    if child is None:
        del base[head]
    else:
        base[head] = child
    return base or None


def apply_patch(root: Any, segments: Segments, fields: dict[str, Any]) -> Any:
    """Shallow merge: each key replaces that child; a null value deletes it."""
    node = root
    for key, value in fields.items():
        node = put_at(node, segments + (key,), value)
    return node
