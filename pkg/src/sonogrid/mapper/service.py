"""Mapper service: event ingestion, throttled grid refresh, and the web API.

The ingest loop holds one subscription to the store's /nodes subtree and
forwards node upserts to stream subscribers immediately; the heat grid
recomputes on its own cadence (default 1 Hz) against a snapshot of node
state, so map reads never wait on interpolation.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import urlsplit

from ..client import RtdbClient
from ..clock import SystemClock
from ..errors import AuthError, TransportError
from .colors import DEFAULT_STOPS, ColorStop, validate_stops
from .grid import GridSpec, HeatGrid, IdwParams, idw_interpolate
from .state import NodeRegistry

log = logging.getLogger(__name__)

RECONNECT_BASE_MS = 500.0
RECONNECT_CAP_MS = 8000.0
STREAM_BUFFER = 1000


@dataclass(frozen=True)
class MapperConfig:
    grid: GridSpec
    stops: tuple[ColorStop, ...] = DEFAULT_STOPS
    idw: IdwParams = field(default_factory=IdwParams)
    stale_after_ms: int = 10_000
    refresh_interval_ms: int = 1000
    value_floor_db: float = 30.0
    value_ceiling_db: float = 120.0
    keepalive_s: float = 30.0
    webapp_dir: str | None = None

    def __post_init__(self) -> None:
        validate_stops(self.stops)

    def to_json(self) -> dict[str, Any]:
        return {
            "grid": self.grid.to_json(),
            "stops": [{"db": s.db, "rgba": list(s.rgba)} for s in self.stops],
            "idw": {
                "power": self.idw.power,
                "radius_m": self.idw.radius_m,
                "snap_m": self.idw.snap_m,
            },
            "stale_after_ms": self.stale_after_ms,
            "refresh_interval_ms": self.refresh_interval_ms,
        }


class StreamHub:
    """Fan-out of mapper events to /api/stream subscribers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._queues: list[queue.Queue] = []

    def register(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=STREAM_BUFFER)
        with self._lock:
            self._queues.append(q)
        return q

    def unregister(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._queues:
                self._queues.remove(q)

    def broadcast(self, kind: str, data: Any) -> None:
        with self._lock:
            targets = list(self._queues)
        for q in targets:
            try:
                q.put_nowait((kind, data))
            except queue.Full:
                # slow browser tab: drop it, it will reconnect with a snapshot
                self.unregister(q)
                try:
                    q.put_nowait(None)
                except queue.Full:
                    pass

    def close_all(self) -> None:
        with self._lock:
            targets = list(self._queues)
            self._queues.clear()
        for q in targets:
            try:
                q.put_nowait(None)
            except queue.Full:
                pass


class MapperService:
    def __init__(
        self,
        rtdb_url: str,
        token: str,
        config: MapperConfig,
        host: str = "127.0.0.1",
        port: int = 0,
        clock=None,
    ):
        self.config = config
        self.clock = clock or SystemClock()
        self.client = RtdbClient(rtdb_url, token)
        self.registry = NodeRegistry(config.value_floor_db, config.value_ceiling_db)
        self.hub = StreamHub()
        self._stop = threading.Event()
        self._stream = None
        self._grid: HeatGrid = idw_interpolate(
            [], config.grid, config.idw, self.clock.now_ms()
        )
        self._threads: list[threading.Thread] = []
        self._httpd = ThreadingHTTPServer((host, port), _MapperHandler)
        self._httpd.daemon_threads = True
        self._httpd.block_on_close = False
        self._httpd.service = self  # type: ignore[attr-defined]

    # -- lifecycle -------------------------------------------------------------

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MapperService":
        for name, target in (
            ("mapper-ingest", self._ingest_loop),
            ("mapper-refresh", self._refresh_loop),
            ("mapper-http", self._httpd.serve_forever),
        ):
            t = threading.Thread(target=target, name=name, daemon=True)
            t.start()
            self._threads.append(t)
        log.info("mapper listening on %s", self.url)
        return self

    def stop(self) -> None:
        self._stop.set()
        stream = self._stream
        if stream is not None:
            stream.close()
        self._httpd.shutdown()
        self.hub.close_all()
        self._httpd.server_close()
        for t in self._threads:
            if t is not threading.current_thread():
                t.join(timeout=5.0)

    # -- ingest ------------------------------------------------------------------

    def _ingest_loop(self) -> None:
        backoff_ms = RECONNECT_BASE_MS
        while not self._stop.is_set():
            try:
                self._stream = self.client.subscribe("/nodes")
                backoff_ms = RECONNECT_BASE_MS
                for kind, path, data in self._stream:
                    now = self.clock.now_ms()
                    changed = self.registry.apply_event(kind, path, data, now)
                    for node_id in changed:
                        state = self.registry.state_of(node_id)
                        if state is None:
                            self.hub.broadcast("node", {"node_id": node_id, "removed": True})
                        else:
                            self.hub.broadcast(
                                "node", state.to_json(now, self.config.stale_after_ms)
                            )
                    if self._stop.is_set():
                        break
            except AuthError:
                log.error("mapper token rejected by the store; retrying")
            except TransportError as exc:
                log.debug("store stream dropped: %s", exc)
            finally:
                if self._stream is not None:
                    self._stream.close()
                    self._stream = None
            if self._stop.is_set():
                return
            self.clock.sleep_ms(backoff_ms, self._stop)
            backoff_ms = min(backoff_ms * 2.0, RECONNECT_CAP_MS)

    # -- grid refresh -------------------------------------------------------------

    def _refresh_loop(self) -> None:
        while not self._stop.is_set():
            self.refresh_grid()
            self.clock.sleep_ms(self.config.refresh_interval_ms, self._stop)

    def refresh_grid(self) -> HeatGrid:
        """Recompute from live (non-stale) nodes and publish atomically."""
        now = self.clock.now_ms()
        live = self.registry.live(now, self.config.stale_after_ms)
        grid = idw_interpolate(live, self.config.grid, self.config.idw, now)
        self._grid = grid
        self.hub.broadcast("grid", grid.to_json())
        return grid

    # -- views ---------------------------------------------------------------------

    def grid(self) -> HeatGrid:
        return self._grid

    def nodes_json(self) -> list[dict]:
        now = self.clock.now_ms()
        return [s.to_json(now, self.config.stale_after_ms) for s in self.registry.states()]


class _MapperHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "sonogrid-mapper"

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    @property
    def service(self) -> MapperService:
        return self.server.service  # type: ignore[attr-defined]

    def _send_json(self, status: int, value: Any) -> None:
        body = json.dumps(value).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        path = urlsplit(self.path).path
        svc = self.service
        if path == "/healthz":
            self._send_json(200, {"ok": True})
        elif path == "/api/nodes":
            self._send_json(200, svc.nodes_json())
        elif path == "/api/grid":
            self._send_json(200, svc.grid().to_json())
        elif path == "/api/config":
            self._send_json(200, svc.config.to_json())
        elif path == "/api/metrics":
            self._send_json(200, svc.registry.metrics())
        elif path == "/api/stream":
            self._stream()
        elif path.startswith("/api/log/"):
            self._node_log(path[len("/api/log/") :])
        else:
            self._static(path)

    # recent readings proxy for the node inspector panel
    def _node_log(self, node_id: str) -> None:
        try:
            entries = self.service.client.get(f"/nodes/{node_id}/log")
        except Exception:
            self._send_json(502, {"error": "store_unreachable"})
            return
        rows = []
        if isinstance(entries, dict):
            keyed = sorted(
                (int(k), v) for k, v in entries.items() if k.lstrip("-").isdigit()
            )
            rows = [v for _, v in keyed[-120:]]
        self._send_json(200, rows)

    def _write_chunk(self, data: bytes) -> None:
        self.wfile.write(f"{len(data):X}\r\n".encode("ascii") + data + b"\r\n")
        self.wfile.flush()

    def _sse_frame(self, kind: str, data: Any) -> bytes:
        return f"event: {kind}\ndata: {json.dumps(data)}\n\n".encode("utf-8")

    def _stream(self) -> None:
        svc = self.service
        q = svc.hub.register()
        self.close_connection = True
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Transfer-Encoding", "chunked")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            # opening snapshot: full node list + current grid
            self._write_chunk(self._sse_frame("nodes", svc.nodes_json()))
            self._write_chunk(self._sse_frame("grid", svc.grid().to_json()))
            while True:
                try:
                    item = q.get(timeout=svc.config.keepalive_s)
                except queue.Empty:
                    self._write_chunk(b": keep-alive\n\n")
                    continue
                if item is None:
                    self.wfile.write(b"0\r\n\r\n")
                    self.wfile.flush()
                    break
                kind, data = item
                self._write_chunk(self._sse_frame(kind, data))
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            svc.hub.unregister(q)

    def _static(self, path: str) -> None:
        webapp_dir = self.service.config.webapp_dir
        if webapp_dir is None:
            if path in ("/", "/index.html"):
                self._send_html(_PLACEHOLDER_PAGE)
            else:
                self._send_json(404, {"error": "not_found"})
            return
        root = Path(webapp_dir).resolve()
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            self._send_json(404, {"error": "not_found"})
            return
        body = target.read_bytes()
        ctype = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".mjs": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".map": "application/json",
            ".png": "image/png",
            ".svg": "image/svg+xml",
        }.get(target.suffix, "application/octet-stream")
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_html(self, html: str) -> None:
        body = html.encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "text/html; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>sonogrid mapper</title></head>
<body><h1>sonogrid mapper</h1>
<p>No dashboard bundle is configured. API endpoints:</p>
<ul>
<li><a href="/api/nodes">/api/nodes</a></li>
<li><a href="/api/grid">/api/grid</a></li>
<li><a href="/api/config">/api/config</a></li>
<li>/api/stream (server-sent events)</li>
<li><a href="/healthz">/healthz</a></li>
</ul></body></html>
"""
