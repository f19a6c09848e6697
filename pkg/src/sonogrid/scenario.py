"""Scenario files: one TOML document describing the store, the mapper, and a fleet.

Environment overrides: SONOGRID_TOKEN replaces the store token (and any
node tokens that inherit it), SONOGRID_BIND replaces the store bind
address.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dsp.blocks import Calibration
from .errors import ValidationError
from .mapper.colors import DEFAULT_STOPS, ColorStop, validate_stops
from .mapper.grid import GridSpec, IdwParams
from .mapper.service import MapperConfig
from .node import NodeConfig
from .sources import SignalSourceSpec

DEFAULT_RTDB_BIND = "127.0.0.1:9900"
DEFAULT_MAPPER_BIND = "127.0.0.1:9901"


@dataclass(frozen=True)
class RtdbSettings:
    host: str
    port: int
    token: str
    journal: Path | None
    fsync: bool = True
    keepalive_s: float = 30.0

    @property
    def client_url(self) -> str:
        host = "127.0.0.1" if self.host in ("0.0.0.0", "::") else self.host
        return f"http://{host}:{self.port}"


@dataclass(frozen=True)
class Scenario:
    rtdb: RtdbSettings
    mapper: MapperConfig
    mapper_host: str
    mapper_port: int
    nodes: tuple[NodeConfig, ...]
    duration_s: float | None = None


def _parse_bind(raw: str) -> tuple[str, int]:
    host, _, port = raw.rpartition(":")
    if not host or not port.isdigit():
        raise ValidationError(f"bind must look like host:port, got {raw!r}")
    return host, int(port)


def _rtdb_settings(doc: dict, base_dir: Path) -> RtdbSettings:
    section = doc.get("rtdb", {})
    bind = os.environ.get("SONOGRID_BIND") or section.get("bind", DEFAULT_RTDB_BIND)
    token = os.environ.get("SONOGRID_TOKEN") or section.get("token", "")
    if not token:
        raise ValidationError("rtdb.token must be non-empty (or set SONOGRID_TOKEN)")
    host, port = _parse_bind(bind)
    journal = section.get("journal")
    journal_path = None
    if journal:
        journal_path = Path(journal)
        if not journal_path.is_absolute():
            journal_path = base_dir / journal_path
    return RtdbSettings(
        host=host,
        port=port,
        token=token,
        journal=journal_path,
        fsync=bool(section.get("fsync", True)),
        keepalive_s=float(section.get("keepalive_s", 30.0)),
    )


def _mapper_config(doc: dict) -> tuple[MapperConfig, str, int]:
    section = doc.get("mapper", {})
    bbox = section.get("bbox")
    if not bbox:
        raise ValidationError("mapper.bbox section is required")
    grid = GridSpec(
        lat_min=float(bbox["lat_min"]),
        lat_max=float(bbox["lat_max"]),
        lon_min=float(bbox["lon_min"]),
        lon_max=float(bbox["lon_max"]),
        rows=int(section.get("rows", 128)),
        cols=int(section.get("cols", 128)),
    )
    raw_stops = section.get("stops")
    if raw_stops:
        stops = validate_stops(
            ColorStop(float(s["db"]), tuple(int(c) for c in s["rgba"])) for s in raw_stops
        )
    else:
        stops = DEFAULT_STOPS
    webapp_dir = section.get("webapp_dir")
    config = MapperConfig(
        grid=grid,
        stops=stops,
        idw=IdwParams(
            power=float(section.get("idw_power", 2.0)),
            radius_m=float(section.get("idw_radius_m", 2000.0)),
            snap_m=float(section.get("idw_snap_m", 1.0)),
        ),
        stale_after_ms=int(section.get("stale_after_ms", 10_000)),
        refresh_interval_ms=int(section.get("refresh_interval_ms", 1000)),
        value_floor_db=float(section.get("value_floor_db", 30.0)),
        value_ceiling_db=float(section.get("value_ceiling_db", 120.0)),
        keepalive_s=float(section.get("keepalive_s", 30.0)),
        webapp_dir=webapp_dir,
    )
    host, port = _parse_bind(section.get("bind", DEFAULT_MAPPER_BIND))
    return config, host, port


def _node_config(raw: dict, rtdb: RtdbSettings, base_dir: Path) -> NodeConfig:
    source_raw = dict(raw.get("source") or {})
    if "path" in source_raw:
        path = Path(source_raw["path"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ValidationError(f"source file not found: {path}")
        source_raw["path"] = str(path)
    source = SignalSourceSpec(
        kind=source_raw.get("kind", "sine"),
        amplitude_counts=float(source_raw.get("amplitude_counts", 0.0)),
        frequency_hz=(
            float(source_raw["frequency_hz"]) if "frequency_hz" in source_raw else None
        ),
        seed=source_raw.get("seed"),
        path=source_raw.get("path"),
    )
    cal_raw = raw.get("calibration") or {}
    calibration = Calibration(
        offset_db=float(cal_raw.get("offset_db", 68.83)),
        floor_db=float(cal_raw.get("floor_db", 30.0)),
        ceiling_db=float(cal_raw.get("ceiling_db", 120.0)),
    )
    return NodeConfig(
        node_id=raw["node_id"],
        lat=float(raw["lat"]),
        lon=float(raw["lon"]),
        server_url=raw.get("server_url", rtdb.client_url),
        auth_token=raw.get("auth_token", rtdb.token),
        publish_interval_ms=int(raw.get("publish_interval_ms", 2000)),
        calibration=calibration,
        source=source,
        sample_rate_hz=float(raw.get("sample_rate_hz", 9600.0)),
        block_size=int(raw.get("block_size", 256)),
        a_weighting=bool(raw.get("a_weighting", False)),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate; raises ValidationError with a readable message."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"scenario file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}")
    base_dir = path.resolve().parent

    rtdb = _rtdb_settings(doc, base_dir)
    mapper, mapper_host, mapper_port = _mapper_config(doc)

    nodes = []
    seen: set[str] = set()
    for raw in doc.get("nodes", []):
        try:
            node = _node_config(raw, rtdb, base_dir)
        except KeyError as exc:
            raise ValidationError(f"node entry missing field {exc}")
        if node.node_id in seen:
            raise ValidationError(f"duplicate node_id {node.node_id!r}")
        seen.add(node.node_id)
        nodes.append(node)

    duration = doc.get("duration_s")
    return Scenario(
        rtdb=rtdb,
        mapper=mapper,
        mapper_host=mapper_host,
        mapper_port=mapper_port,
        nodes=tuple(nodes),
        duration_s=float(duration) if duration is not None else None,
    )
