"""HTTP wire protocol: Firebase-style REST verbs plus SSE change streams.

Routes are `/{path}.json?auth=TOKEN` (or an Authorization: Bearer header);
GET with `Accept: text/event-stream` upgrades to a server-sent-events
stream whose first event is the snapshot.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlsplit

from ..errors import AuthError, StreamOverflow, ValidationError
from . import tree
from .store import Store

log = logging.getLogger(__name__)

DEFAULT_KEEPALIVE_S = 30.0


def _reject_constant(name: str):
    raise ValidationError(f"non-finite JSON constant {name}")


def parse_json_body(raw: bytes) -> Any:
    try:
        return json.loads(raw.decode("utf-8"), parse_constant=_reject_constant)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ValidationError(f"malformed JSON body: {exc}") from exc


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "sonogrid-rtdb"

    # quiet the default stderr-per-request logging
    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    @property
    def store(self) -> Store:
        return self.server.store  # type: ignore[attr-defined]

    @property
    def keepalive_s(self) -> float:
        return self.server.keepalive_s  # type: ignore[attr-defined]

    # -- plumbing -------------------------------------------------------------

    def _send_json(self, status: int, value: Any) -> None:
        body = json.dumps(value).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _route(self) -> tuple[str, str | None] | None:
        """(tree path, token) or None after responding 404/400."""
        parts = urlsplit(self.path)
        if not parts.path.endswith(".json"):
            self._send_json(404, {"error": "not_found"})
            return None
        raw_path = parts.path[: -len(".json")] or "/"
        token = None
        query = parse_qs(parts.query)
        if "auth" in query:
            token = query["auth"][0]
        else:
            header = self.headers.get("Authorization", "")
            if header.startswith("Bearer "):
                token = header[len("Bearer ") :]
        return raw_path, token

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _guarded(self, fn) -> None:
        try:
            fn()
        except AuthError:
            self._send_json(401, {"error": "unauthorized"})
        except ValidationError as exc:
            log.debug("bad request: %s", exc)
            self._send_json(400, {"error": "bad_request"})

    # -- verbs ----------------------------------------------------------------

    def do_GET(self) -> None:
        route = self._route()
        if route is None:
            return
        path, token = route
        if "text/event-stream" in (self.headers.get("Accept") or ""):
            self._guarded(lambda: self._stream(path, token))
            return
        self._guarded(lambda: self._send_json(200, self.store.get(path, token=token)))

    def do_PUT(self) -> None:
        route = self._route()
        if route is None:
            return
        path, token = route

        def run():
            value = parse_json_body(self._read_body())
            self.store.put(path, value, token=token)
            self._send_json(200, tree.normalize(value))

        self._guarded(run)

    def do_PATCH(self) -> None:
        route = self._route()
        if route is None:
            return
        path, token = route

        def run():
            fields = parse_json_body(self._read_body())
            self.store.patch(path, fields, token=token)
            self._send_json(200, fields)

        self._guarded(run)

    def do_DELETE(self) -> None:
        route = self._route()
        if route is None:
            return
        path, token = route

        def run():
            self.store.delete(path, token=token)
            self._send_json(200, None)

        self._guarded(run)

    # -- streaming --------------------------------------------------------------

    def _write_chunk(self, data: bytes) -> None:
        # chunked framing so streaming clients see each event the moment it lands
        self.wfile.write(f"{len(data):X}\r\n".encode("ascii") + data + b"\r\n")
        self.wfile.flush()

    def _stream(self, path: str, token: str | None) -> None:
        sub = self.store.subscribe(path, token=token)
        self.close_connection = True
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Transfer-Encoding", "chunked")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            while True:
                try:
                    event = sub.get(timeout=self.keepalive_s)
                except StopIteration:
                    self.wfile.write(b"0\r\n\r\n")
                    self.wfile.flush()
                    break
                except StreamOverflow:
                    self._write_chunk(b": overflow, resubscribe required\n\n")
                    self.wfile.write(b"0\r\n\r\n")
                    self.wfile.flush()
                    break
                if event is None:
                    self._write_chunk(b": keep-alive\n\n")
                    continue
                frame = (
                    f"event: {event.kind}\n"
                    f"data: {json.dumps({'path': event.path, 'data': event.data})}\n\n"
                )
                self._write_chunk(frame.encode("utf-8"))
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.store.unsubscribe(sub)


class RtdbServer:
    """Threaded HTTP front end over a Store."""

    def __init__(
        self,
        store: Store,
        host: str = "127.0.0.1",
        port: int = 0,
        keepalive_s: float = DEFAULT_KEEPALIVE_S,
    ):
        self.store = store
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        # don't join lingering keep-alive handler threads on close
        self._httpd.block_on_close = False
        self._httpd.store = store  # type: ignore[attr-defined]
        self._httpd.keepalive_s = keepalive_s  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "RtdbServer":
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="rtdb-http", daemon=True
        )
        self._thread.start()
        log.info("rtdb listening on %s", self.url)
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        # closing the store first wakes SSE handlers so they exit promptly
        self.store.close()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
