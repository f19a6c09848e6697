"""Acceptance suite: one test per criterion, each at its stated tolerance.

The end-to-end criteria drive the real binaries over real HTTP at the
2-second publish cadence, so this module takes a little over a minute.
"""

import copy
import json
import math
import random
import re
import shutil
import signal
import subprocess
import sys
import textwrap
import threading
import time
from pathlib import Path

import numpy as np
import pytest
import requests

from sonogrid.client import RtdbClient
from sonogrid.dsp import Calibration, PipelineConfig, SampleBlock, SplPipeline, a_weight_db
from sonogrid.dsp import hartley, power_spectrum, total_energy
from sonogrid.mapper import GridSpec, IdwParams, MapperConfig, MapperService
from sonogrid.node import NodeAgent, NodeConfig
from sonogrid.rtdb import RtdbServer, Store
from sonogrid.rtdb.journal import read_journal, replay
from sonogrid.sources import SignalSourceSpec

from conftest import kernel_lanes, sine_block_samples
from model_oracle import ModelTree, fold_event

REPO = Path(__file__).resolve().parent.parent


# -- criterion: FHT correctness ------------------------------------------------


def test_fht_matches_cas_sum_oracle_within_1e9():
    """N in {8,16,64,256}, 100 random blocks each, 1e-9 relative, < 5 s."""
    started = time.monotonic()
    rng = np.random.default_rng(2024)
    for n in (8, 16, 64, 256):
        k = np.arange(n)
        theta = 2.0 * np.pi * np.outer(k, k) / n
        cas = np.cos(theta) + np.sin(theta)
        for _ in range(100):
            x = rng.uniform(-511.5, 511.5, size=n)
            want = cas @ x
            got = hartley(x)
            scale = max(float(np.max(np.abs(want))), 1.0)
            assert float(np.max(np.abs(got - want))) / scale < 1e-9
    assert time.monotonic() - started < 5.0


def test_parseval_energy_bookkeeping_within_1e9():
    """Time-domain energy equals spectral bookkeeping on 100 random blocks."""
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.choice([8, 16, 64, 256]))
        x = rng.uniform(-511.5, 511.5, size=n)
        spec = power_spectrum(hartley(x), 9600.0)
        want = float(np.sum(x * x))
        assert abs(total_energy(spec) - want) < 1e-9 * want


# -- criterion: sine SPL oracle --------------------------------------------------


def test_sine_spl_oracle_within_01db():
    """Full pipeline on bin-centered sines matches 20*log10(A/sqrt(2)) + 68.83."""
    pipe = SplPipeline(PipelineConfig())
    for amplitude in (50.0, 100.0, 255.75, 511.5):
        blocks = []
        for i in range(8):
            phase0 = 2.0 * math.pi * 19 * i  # whole turns keep phase continuous
            samples = sine_block_samples(amplitude, 19, 256, phase0)
            blocks.append(SampleBlock(samples, 9600.0))
        got = pipe.measure(blocks).spl_db
        want = 20.0 * math.log10(amplitude / math.sqrt(2.0)) + 68.83
        assert abs(got - want) <= 0.1, f"A={amplitude}: {got} vs {want}"
        if amplitude == 511.5:
            assert abs(got - 120.0) <= 0.1


# -- criterion: A-weighting -------------------------------------------------------


def test_a_weighting_reference_points_within_02db():
    assert abs(a_weight_db(100.0) - (-19.1)) <= 0.2
    assert abs(a_weight_db(1000.0) - 0.0) <= 0.2
    assert abs(a_weight_db(10_000.0) - (-2.5)) <= 0.2


# -- criterion: rtdb randomized semantics -------------------------------------------


def test_rtdb_randomized_model_equivalence_and_recovery(tmp_path):
    """1000 random writes: final tree, subscriber folds, and kill-recovery
    after every prefix all agree with the naive model. < 30 s."""
    started = time.monotonic()
    rng = random.Random(4242)
    journal = tmp_path / "journal.ndjson"
    store = Store(token="acc", journal_path=journal, fsync=False)
    model = ModelTree()

    model_states = [None]  # model root after k ops
    sizes = [0]  # journal byte size after k ops
    subscriptions = []  # (sub, path, snapshot_data)

    segments = ["nodes", "n1", "n2", "latest", "log", "a", "b"]

    def random_path(max_depth=3):
        depth = rng.randint(1, max_depth)
        return "/" + "/".join(rng.choices(segments, k=depth))

    def random_value(depth=0):
        roll = rng.random()
        if roll < 0.25:
            return rng.randint(-5, 100)
        if roll < 0.4:
            return round(rng.uniform(30, 120), 2)
        if roll < 0.5:
            return rng.choice(["x", "reading", ""])
        if roll < 0.6:
            return rng.choice([True, False])
        if roll < 0.7 or depth >= 2:
            return None
        return {rng.choice(segments): random_value(depth + 1) for _ in range(rng.randint(1, 3))}

    for step in range(1000):
        if step in (0, 250, 500):
            path = ("/", "/nodes", "/n1")[(0, 250, 500).index(step)]
            sub = store.subscribe(path)
            snapshot = sub.get(timeout=0)
            subscriptions.append((sub, path, snapshot.data))
        roll = rng.random()
        path = random_path()
        if roll < 0.45:
            value = random_value()
            store.put(path, value)
            model.put(path, value)
        elif roll < 0.75:
            fields = {rng.choice(segments): random_value(1) for _ in range(rng.randint(1, 3))}
            store.patch(path, fields)
            model.patch(path, fields)
        else:
            store.delete(path)
            model.put(path, None)
        model_states.append(copy.deepcopy(model.root))
        sizes.append(journal.stat().st_size)

    # final tree equals the model
    assert store.get("/") == model.root

    # every subscriber's snapshot + event fold equals the model at its fence
    for sub, path, snapshot in subscriptions:
        folded = snapshot
        while True:
            event = sub.get(timeout=0)
            if event is None:
                break
            folded = fold_event(folded, event)
        assert folded == model.get(path), f"fold mismatch at {path}"

    # kill-recover after any prefix preserves exactly the acked writes
    raw = journal.read_bytes()
    scratch = tmp_path / "scratch.ndjson"
    for k in range(0, 1001, 1):
        scratch.write_bytes(raw[: sizes[k]])
        root, seq = replay(read_journal(scratch))
        assert root == model_states[k], f"recovery mismatch after {k} ops"
        assert seq == k
    store.close()
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"randomized rtdb acceptance took {elapsed:.1f} s"


# -- criterion: IDW properties ---------------------------------------------------


def test_idw_exactness_midpoint_and_boundedness():
    """Exact at nodes; (60,80) midpoint exactly 70; bounded on 1000 configs."""
    from sonogrid.kernels import idw_fill

    bbox = dict(lat_min=23.7750, lat_max=23.7890, lon_min=90.4000, lon_max=90.4160)

    def run(nodes, spec, power=2.0):
        out = np.empty((spec.rows, spec.cols))
        idw_fill(
            np.array([n[0] for n in nodes], dtype=np.float64),
            np.array([n[1] for n in nodes], dtype=np.float64),
            np.array([n[2] for n in nodes], dtype=np.float64),
            np.asarray(spec.cell_lats()),
            np.asarray(spec.cell_lons()),
            power,
            2000.0,
            1.0,
            out,
        )
        return out

    # exactness at nodes
    spec = GridSpec(**bbox, rows=32, cols=32)
    nodes = [
        (float(spec.cell_lats()[3]), float(spec.cell_lons()[4]), 45.67),
        (float(spec.cell_lats()[20]), float(spec.cell_lons()[25]), 101.01),
    ]
    out = run(nodes, spec)
    assert out[3, 4] == 45.67
    assert out[20, 25] == 101.01

    # symmetric midpoint is exactly the mean (dyadic lons: exact geometry)
    sym = GridSpec(lat_min=23.7750, lat_max=23.7890, lon_min=90.2265625, lon_max=90.2734375, rows=1, cols=3)
    lat = float(sym.cell_lats()[0])
    out = run([(lat, float(sym.cell_lons()[0]), 60.0), (lat, float(sym.cell_lons()[2]), 80.0)], sym)
    assert out[0, 1] == 70.0

    # boundedness on 1000 random configurations
    rng = random.Random(99)
    small = GridSpec(**bbox, rows=6, cols=6)
    for _ in range(1000):
        count = rng.randint(1, 7)
        nodes = [
            (
                rng.uniform(bbox["lat_min"], bbox["lat_max"]),
                rng.uniform(bbox["lon_min"], bbox["lon_max"]),
                rng.uniform(30.0, 120.0),
            )
            for _ in range(count)
        ]
        out = run(nodes, small, power=rng.choice([1.0, 2.0, 3.0]))
        values = [v for _, _, v in nodes]
        present = out[~np.isnan(out)]
        assert present.size == 0 or (
            present.min() >= min(values) and present.max() <= max(values)
        )


# -- criterion: end-to-end demo ------------------------------------------------------


def analytic_db(amplitude, offset_db=40.0):
    return 20.0 * math.log10(amplitude / math.sqrt(2.0)) + offset_db


class StreamCollector:
    """Background reader of the mapper's /api/stream."""

    def __init__(self, mapper_url):
        self.events = []
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, args=(mapper_url,), daemon=True)
        self._thread.start()

    def _run(self, mapper_url):
        try:
            resp = requests.get(f"{mapper_url}/api/stream", stream=True, timeout=(5, 120))
            kind = None
            for raw in resp.iter_lines():
                if self._stop.is_set():
                    break
                line = raw.decode()
                if line.startswith("event:"):
                    kind = line.split(":", 1)[1].strip()
                elif line.startswith("data:") and kind:
                    self.events.append((time.monotonic(), kind, json.loads(line[5:])))
                    kind = None
            resp.close()
        except requests.RequestException:
            pass

    def stop(self):
        self._stop.set()

    def node_event(self, node_id, min_seq=None):
        for ts, kind, data in self.events:
            if kind == "node" and data.get("node_id") == node_id:
                if min_seq is None or (data.get("seq") or 0) >= min_seq:
                    return ts, data
        return None


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    """serve + the bundled 3-node demo for its full 60 s duration."""
    tmp = tmp_path_factory.mktemp("demo")
    scenario_text = (REPO / "scenarios" / "demo.toml").read_text()
    scenario_text = scenario_text.replace("127.0.0.1:9900", "127.0.0.1:0")
    scenario_text = scenario_text.replace("127.0.0.1:9901", "127.0.0.1:0")
    config = tmp / "demo.toml"
    config.write_text(scenario_text)

    serve = subprocess.Popen(
        [sys.executable, "-m", "sonogrid.cli", "serve", "--config", str(config)],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
        cwd=tmp,
    )
    urls = {}
    deadline = time.time() + 20
    while time.time() < deadline and len(urls) < 2:
        line = serve.stdout.readline()
        m = re.match(r"(rtdb|mapper) listening on (http://\S+)", line)
        if m:
            urls[m.group(1)] = m.group(2)
    assert len(urls) == 2, "serve did not come up"

    collector = StreamCollector(urls["mapper"])
    client = RtdbClient(urls["rtdb"], "demo-token")

    t_run_start = time.time()
    nodes_proc = subprocess.run(
        [sys.executable, "-m", "sonogrid.cli", "nodes", "--config", str(config)],
        capture_output=True,
        text=True,
        cwd=tmp,
        timeout=120,
    )
    t_run_end = time.time()

    # latency probes against the still-running serve stack
    latencies = []
    for i in range(5):
        probe = {
            "node_id": "probe",
            "ts": int(time.time() * 1000),
            "spl_db": 64.0,
            "lat": 23.7785546875,
            "lon": 90.4040625,
            "seq": i + 1,
        }
        t_ack0 = time.monotonic()
        client.put("/nodes/probe/latest", probe)
        t_ack = time.monotonic()
        got = None
        while got is None and time.monotonic() - t_ack < 2.0:
            got = collector.node_event("probe", min_seq=i + 1)
            if got is None:
                time.sleep(0.005)
        assert got is not None, "probe event never reached the mapper stream"
        latencies.append(got[0] - t_ack)
        time.sleep(0.05)
    client.put("/nodes/probe", None)  # drop the probe before node-count checks
    time.sleep(0.5)

    try:
        yield {
            "urls": urls,
            "client": client,
            "config": config,
            "tmp": tmp,
            "nodes_stdout": nodes_proc.stdout,
            "nodes_rc": nodes_proc.returncode,
            "run_seconds": t_run_end - t_run_start,
            "latencies": latencies,
            "collector": collector,
        }
    finally:
        collector.stop()
        serve.send_signal(signal.SIGINT)
        serve.wait(timeout=15)


DEMO_NODES = {
    "node-quiet": (10.0, 32, 32),
    "node-medium": (25.0, 64, 64),
    "node-loud": (450.0, 96, 96),
}


def test_e2e_demo_each_node_logs_30pm1_readings(demo_run):
    assert demo_run["nodes_rc"] == 0, demo_run["nodes_stdout"]
    assert demo_run["run_seconds"] >= 58.0, "fleet should have run the full 60 s"
    client = demo_run["client"]
    for node_id in DEMO_NODES:
        log_entries = client.get(f"/nodes/{node_id}/log")
        assert log_entries, f"{node_id} logged nothing"
        count = len(log_entries)
        assert 29 <= count <= 31, f"{node_id} logged {count} readings"
        seqs = sorted(int(k) for k in log_entries)
        assert seqs == list(range(1, count + 1)), "log must be gapless"


def test_e2e_demo_api_nodes_match_analytic_levels(demo_run):
    nodes = requests.get(f"{demo_run['urls']['mapper']}/api/nodes", timeout=5).json()
    by_id = {n["node_id"]: n for n in nodes}
    assert sorted(by_id) == sorted(DEMO_NODES)
    for node_id, (amplitude, _, _) in DEMO_NODES.items():
        state = by_id[node_id]
        assert state["stale"] is False
        assert abs(state["spl_db"] - analytic_db(amplitude)) <= 0.2, (
            node_id,
            state["spl_db"],
            analytic_db(amplitude),
        )


def test_e2e_demo_grid_exact_at_node_cells(demo_run):
    grid = requests.get(f"{demo_run['urls']['mapper']}/api/grid", timeout=5).json()
    nodes = requests.get(f"{demo_run['urls']['mapper']}/api/nodes", timeout=5).json()
    by_id = {n["node_id"]: n for n in nodes}
    assert grid["rows"] == 128 and grid["cols"] == 128
    for node_id, (_, row, col) in DEMO_NODES.items():
        cell = grid["values"][row * grid["cols"] + col]
        assert cell == by_id[node_id]["spl_db"], (node_id, cell)


def test_e2e_demo_csv_export_has_90pm3_rows(demo_run):
    out = demo_run["tmp"] / "export.csv"
    rc = subprocess.run(
        [
            sys.executable,
            "-m",
            "sonogrid.cli",
            "export",
            "--config",
            str(demo_run["config"]),
            "--out",
            str(out),
        ],
        capture_output=True,
        text=True,
        timeout=30,
    )
    assert rc.returncode == 0, rc.stderr
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "node_id,ts,lat,lon,spl_db,seq"
    data_rows = len(lines) - 1
    assert 87 <= data_rows <= 93, f"CSV has {data_rows} rows"


def test_e2e_demo_publish_to_stream_latency_under_500ms(demo_run):
    latencies = demo_run["latencies"]
    assert latencies and max(latencies) < 0.5, [f"{l*1000:.1f}ms" for l in latencies]


# -- criterion: staleness ---------------------------------------------------------


def test_staleness_excludes_silent_node_and_recovers():
    """A silenced node leaves the grid after 10 s and returns on next publish."""
    spec = GridSpec(
        lat_min=23.7750, lat_max=23.7890, lon_min=90.4000, lon_max=90.4160, rows=32, cols=32
    )
    rtdb = RtdbServer(Store(token="t"), port=0).start()
    mapper = MapperService(
        rtdb.url,
        "t",
        MapperConfig(grid=spec, refresh_interval_ms=250, keepalive_s=1.0),
        port=0,
    ).start()
    client = RtdbClient(rtdb.url, "t")
    cell_a = (5, 5)
    cell_b = (20, 20)

    def put(node_id, cell, spl, seq):
        client.put(
            f"/nodes/{node_id}/latest",
            {
                "node_id": node_id,
                "ts": int(time.time() * 1000),
                "spl_db": spl,
                "lat": float(spec.cell_lats()[cell[0]]),
                "lon": float(spec.cell_lons()[cell[1]]),
                "seq": seq,
            },
        )

    def grid_value(cell):
        grid = requests.get(f"{mapper.url}/api/grid", timeout=5).json()
        return grid["values"][cell[0] * grid["cols"] + cell[1]]

    def wait_for(fn, timeout_s=6.0):
        deadline = time.time() + timeout_s
        while time.time() < deadline:
            if fn():
                return True
            time.sleep(0.1)
        return False

    try:
        put("alpha", cell_a, 70.0, 1)
        put("beta", cell_b, 80.0, 1)
        assert wait_for(lambda: grid_value(cell_a) == 70.0 and grid_value(cell_b) == 80.0)

        # keep beta alive while alpha goes silent for > 10 s
        silent_start = time.time()
        seq = 2
        while time.time() - silent_start < 11.0:
            put("beta", cell_b, 80.0, seq)
            seq += 1
            time.sleep(1.0)

        assert wait_for(lambda: grid_value(cell_a) is None, timeout_s=4.0), (
            "silent node still contributes to the grid"
        )
        states = {n["node_id"]: n for n in requests.get(f"{mapper.url}/api/nodes").json()}
        assert states["alpha"]["stale"] is True  # still listed as a marker
        assert states["beta"]["stale"] is False
        assert grid_value(cell_b) == 80.0

        # resume: next publish re-enters the interpolation
        put("alpha", cell_a, 71.0, 99)
        assert wait_for(lambda: grid_value(cell_a) == 71.0)
        states = {n["node_id"]: n for n in requests.get(f"{mapper.url}/api/nodes").json()}
        assert states["alpha"]["stale"] is False
    finally:
        mapper.stop()
        rtdb.stop()
