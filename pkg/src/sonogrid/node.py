"""One simulated node: signal source -> metering pipeline -> periodic publish."""

from __future__ import annotations

import logging
import random
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Protocol

from .clock import SystemClock
from .dsp.blocks import Calibration, SampleBlock
from .dsp.pipeline import PipelineConfig, SplPipeline
from .errors import AuthError, ValidationError
from .sources import SignalSourceSpec, make_source

log = logging.getLogger(__name__)

NODE_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")

MIN_INTERVAL_MS = 100
DEFAULT_INTERVAL_MS = 2000

BACKOFF_BASE_MS = 500.0
BACKOFF_FACTOR = 2.0
BACKOFF_CAP_MS = 8000.0
LOG_QUEUE_MAX = 1000
FLUSH_TIMEOUT_S = 2.0


@dataclass(frozen=True)
class NodeConfig:
    node_id: str
    lat: float
    lon: float
    server_url: str
    auth_token: str
    publish_interval_ms: int = DEFAULT_INTERVAL_MS
    calibration: Calibration = field(default_factory=Calibration)
    source: SignalSourceSpec = field(
        default_factory=lambda: SignalSourceSpec("sine", 100.0, 600.0)
    )
    sample_rate_hz: float = 9600.0
    block_size: int = 256
    a_weighting: bool = False

    def __post_init__(self) -> None:
        if not NODE_ID_RE.match(self.node_id):
            raise ValidationError(f"node_id {self.node_id!r} is not path-safe")
        if not (-90.0 <= self.lat <= 90.0):
            raise ValidationError("lat outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValidationError("lon outside [-180, 180]")
        if self.publish_interval_ms < MIN_INTERVAL_MS:
            raise ValidationError(f"publish_interval_ms must be >= {MIN_INTERVAL_MS}")

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            sample_rate_hz=self.sample_rate_hz,
            block_size=self.block_size,
            calibration=self.calibration,
            a_weighting=self.a_weighting,
        )


@dataclass(frozen=True)
class ReadingMessage:
    node_id: str
    ts: int
    spl_db: float
    lat: float
    lon: float
    seq: int

    def to_wire(self) -> dict[str, Any]:
        return {
            "node_id": self.node_id,
            "ts": self.ts,
            "spl_db": self.spl_db,
            "lat": self.lat,
            "lon": self.lon,
            "seq": self.seq,
        }


class Transport(Protocol):
    def put(self, path: str, value: Any) -> Any: ...


class Publisher:
    """Delivery policy: /latest is latest-wins, /log/{seq} is a bounded queue.

    Failed deliveries retry with exponential backoff (jittered); auth
    failures are fatal and surfaced instead of retried. Log entries past
    the queue bound drop oldest-first with a counted metric.
    """

    def __init__(
        self,
        transport: Transport,
        node_id: str,
        *,
        clock=None,
        jitter_rng: random.Random | None = None,
        max_queue: int = LOG_QUEUE_MAX,
        backoff_base_ms: float = BACKOFF_BASE_MS,
        backoff_cap_ms: float = BACKOFF_CAP_MS,
    ):
        self.transport = transport
        self.node_id = node_id
        self.clock = clock or SystemClock()
        self.jitter_rng = jitter_rng or random.Random()
        self.max_queue = max_queue
        self.backoff_base_ms = backoff_base_ms
        self.backoff_cap_ms = backoff_cap_ms

        self._cond = threading.Condition()
        self._stop_event = threading.Event()
        self._pending_latest: ReadingMessage | None = None
        self._log_queue: list[ReadingMessage] = []
        self._backoff_ms = backoff_base_ms
        self.fatal_error: Exception | None = None
        self.published = 0
        self.latest_published = 0
        self.retried = 0
        self.dropped = 0

    def submit(self, msg: ReadingMessage) -> None:
        with self._cond:
            if self.fatal_error is not None:
                return
            self._pending_latest = msg
            if len(self._log_queue) >= self.max_queue:
                self._log_queue.pop(0)
                self.dropped += 1
                log.warning("%s: log queue full, dropped oldest entry", self.node_id)
            self._log_queue.append(msg)
            self._cond.notify_all()

    def _take_work(self) -> tuple[str, ReadingMessage] | None:
        if self._pending_latest is not None:
            return ("latest", self._pending_latest)
        if self._log_queue:
            return ("log", self._log_queue[0])
        return None

    def pump_once(self) -> bool:
        """Attempt one delivery. Returns False when there was nothing to do."""
        with self._cond:
            work = self._take_work()
        if work is None:
            return False
        kind, msg = work
        path = (
            f"/nodes/{self.node_id}/latest"
            if kind == "latest"
            else f"/nodes/{self.node_id}/log/{msg.seq}"
        )
        try:
            self.transport.put(path, msg.to_wire())
        except AuthError as exc:
            with self._cond:
                self.fatal_error = exc
                self._pending_latest = None
                self._log_queue.clear()
                self._cond.notify_all()
            self._stop_event.set()
            log.error("%s: authentication rejected, giving up: %s", self.node_id, exc)
            return False
        except Exception as exc:
            self.retried += 1
            delay = self._backoff_ms * (0.5 + 0.5 * self.jitter_rng.random())
            self._backoff_ms = min(self._backoff_ms * BACKOFF_FACTOR, self.backoff_cap_ms)
            log.debug("%s: publish failed (%s), backing off %.0f ms", self.node_id, exc, delay)
            self.clock.sleep_ms(delay, self._stop_event)
            return True
        self._backoff_ms = self.backoff_base_ms
        with self._cond:
            if kind == "latest":
                self.latest_published += 1
                if self._pending_latest is msg:
                    self._pending_latest = None
            else:
                if self._log_queue and self._log_queue[0] is msg:
                    self._log_queue.pop(0)
                self.published += 1
            self._cond.notify_all()
        return True

    def run_worker(self) -> None:
        while True:
            with self._cond:
                while (
                    self._take_work() is None
                    and not self._stop_event.is_set()
                    and self.fatal_error is None
                ):
                    self._cond.wait(0.1)
                if self.fatal_error is not None:
                    return
                if self._stop_event.is_set() and self._take_work() is None:
                    return
            self.pump_once()
            if self._stop_event.is_set():
                # flush already spent its drain budget before setting the event
                return

    def idle(self) -> bool:
        with self._cond:
            return self._take_work() is None

    def flush_and_stop(self, timeout_s: float = FLUSH_TIMEOUT_S) -> None:
        """Best-effort drain bounded by wall time, then stop the worker."""
        deadline = time.monotonic() + timeout_s
        with self._cond:
            while (
                self._take_work() is not None
                and self.fatal_error is None
                and time.monotonic() < deadline
            ):
                self._cond.wait(0.05)
        self._stop_event.set()
        with self._cond:
            self._cond.notify_all()

    def stats(self) -> dict[str, int]:
        with self._cond:
            return {
                "published": self.published,
                "retried": self.retried,
                "dropped": self.dropped,
            }


class NodeAgent:
    """Drift-free measure/publish loop for one simulated device."""

    def __init__(
        self,
        config: NodeConfig,
        transport: Transport,
        clock=None,
        publisher: Publisher | None = None,
    ):
        self.config = config
        self.clock = clock or SystemClock()
        self.pipeline = SplPipeline(config.pipeline_config())
        self.source = make_source(config.source, config.sample_rate_hz)
        self.publisher = publisher or Publisher(
            transport,
            config.node_id,
            clock=self.clock,
            jitter_rng=random.Random(config.source.seed or 0),
        )
        self._seq = 0
        self.measured = 0

    def measure_once(self) -> ReadingMessage:
        """Run the interval's blocks through the pipeline and stamp the result."""
        cfg = self.config
        ts = self.clock.now_ms()
        n_blocks = self.pipeline.config.blocks_per_interval(cfg.publish_interval_ms)
        blocks = [
            SampleBlock(self.source.next_block(cfg.block_size), cfg.sample_rate_hz, ts)
            for _ in range(n_blocks)
        ]
        reading = self.pipeline.measure(blocks, ts)
        self._seq += 1
        self.measured += 1
        return ReadingMessage(
            node_id=cfg.node_id,
            ts=ts,
            spl_db=round(reading.spl_db, 2),
            lat=cfg.lat,
            lon=cfg.lon,
            seq=self._seq,
        )

    def run(self, stop: threading.Event | None = None, max_publishes: int | None = None) -> dict:
        """Loop until stopped; interval is measured start-to-start (no drift)."""
        stop = stop or threading.Event()
        worker = threading.Thread(
            target=self.publisher.run_worker, name=f"publish-{self.config.node_id}", daemon=True
        )
        worker.start()
        next_tick = self.clock.now_ms()
        try:
            while not stop.is_set():
                if self.publisher.fatal_error is not None:
                    break
                self.publisher.submit(self.measure_once())
                if max_publishes is not None and self.measured >= max_publishes:
                    break
                next_tick += self.config.publish_interval_ms
                if not self.clock.wait_until(next_tick, stop):
                    break
        finally:
            self.publisher.flush_and_stop()
            worker.join(timeout=FLUSH_TIMEOUT_S + 1.0)
        summary = {"node_id": self.config.node_id, "measured": self.measured}
        summary.update(self.publisher.stats())
        if self.publisher.fatal_error is not None:
            summary["error"] = str(self.publisher.fatal_error)
        return summary
