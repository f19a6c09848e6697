"""HTTP client for the JSON tree store: REST verbs plus the event stream."""

from __future__ import annotations

import json
import socket
from typing import Any, Iterator

import requests

from .errors import AuthError, TransportError, ValidationError


class RtdbClient:
    """Thin wrapper translating HTTP status into the store's error model."""

    def __init__(self, base_url: str, token: str, timeout_s: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout_s = timeout_s
        self._session = requests.Session()

    def _url(self, path: str) -> str:
        if not path.startswith("/"):
            path = "/" + path
        if path == "/":
            return f"{self.base_url}/.json"
        return f"{self.base_url}{path.rstrip('/')}.json"

    def _check(self, resp: requests.Response) -> Any:
        if resp.status_code in (401, 403):
            raise AuthError(f"{resp.status_code}: {resp.text.strip()}")
        if resp.status_code == 400:
            raise ValidationError(resp.text.strip())
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text.strip()}")
        return resp.json()

    def get(self, path: str) -> Any:
        try:
            resp = self._session.get(
                self._url(path), params={"auth": self.token}, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return self._check(resp)

    def put(self, path: str, value: Any) -> Any:
        try:
            resp = self._session.put(
                self._url(path),
                params={"auth": self.token},
                data=json.dumps(value),
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return self._check(resp)

    def patch(self, path: str, fields: dict) -> Any:
        try:
            resp = self._session.patch(
                self._url(path),
                params={"auth": self.token},
                data=json.dumps(fields),
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return self._check(resp)

    def delete(self, path: str) -> Any:
        try:
            resp = self._session.delete(
                self._url(path), params={"auth": self.token}, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return self._check(resp)

    def subscribe(self, path: str, read_timeout_s: float = 120.0) -> "EventStream":
        """Open a server-sent-events stream; first event is the snapshot."""
        try:
            resp = self._session.get(
                self._url(path),
                params={"auth": self.token},
                headers={"Accept": "text/event-stream"},
                stream=True,
                timeout=(self.timeout_s, read_timeout_s),
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            resp.close()
            raise AuthError(f"{resp.status_code}")
        if resp.status_code != 200:
            body = resp.text
            resp.close()
            raise TransportError(f"HTTP {resp.status_code}: {body.strip()}")
        return EventStream(resp)


class EventStream:
    """Parses `event:`/`data:` frames; iteration yields (kind, path, data)."""

    def __init__(self, response: requests.Response):
        self._response = response
        self._closed = False

    def close(self) -> None:
        """Safe from any thread: wakes a reader blocked on the socket."""
        self._closed = True
        sock = None
        try:
            sock = self._response.raw._fp.fp.raw._sock
        except AttributeError:
            pass
        if sock is not None:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        self._response.close()

    def __enter__(self) -> "EventStream":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __iter__(self) -> Iterator[tuple[str, str, Any]]:
        event_kind = None
        data_lines: list[str] = []
        try:
            for raw in self._iter_lines():
                line = raw.decode("utf-8", errors="replace")
                if line == "":
                    if event_kind is not None and data_lines:
                        payload = json.loads("\n".join(data_lines))
                        yield event_kind, payload.get("path", "/"), payload.get("data")
                    event_kind = None
                    data_lines = []
                elif line.startswith(":"):
                    continue  # keep-alive comment
                elif line.startswith("event:"):
                    event_kind = line[len("event:") :].strip()
                elif line.startswith("data:"):
                    data_lines.append(line[len("data:") :].strip())
        except (requests.RequestException, OSError, AttributeError, ValueError) as exc:
            if self._closed:
                return  # deliberate close from another thread, not a failure
            raise TransportError(str(exc)) from exc

    def _iter_lines(self) -> Iterator[bytes]:
        """Line splitter that emits each line as soon as its newline arrives."""
        pending = b""
        for chunk in self._response.iter_content(chunk_size=8192):
            if not chunk:
                continue
            pending += chunk
            while True:
                nl = pending.find(b"\n")
                if nl < 0:
                    break
                line = pending[:nl]
                pending = pending[nl + 1 :]
                yield line.rstrip(b"\r")
        if pending:
            yield pending.rstrip(b"\r")
