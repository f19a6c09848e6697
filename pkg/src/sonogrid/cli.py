"""One binary wiring the system together: serve, nodes, export, replay."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

import numpy as np

from . import __version__
from .client import RtdbClient
from .dsp import PipelineConfig, SampleBlock, SplPipeline, apply_window, fht, power_spectrum, remove_dc
from .dsp.blocks import Calibration
from .errors import TransportError, ValidationError
from .mapper.export import export_csv, leq_summary
from .mapper.service import MapperService
from .node import NodeAgent
from .rtdb import RtdbServer, Store
from .scenario import Scenario, load_scenario
from .sources import load_adc_file

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _parse_duration_s(raw: str) -> float:
    units = {"s": 1.0, "m": 60.0, "h": 3600.0}
    if raw and raw[-1] in units:
        return float(raw[:-1]) * units[raw[-1]]
    return float(raw)


def _install_stop_handler(stop: threading.Event) -> None:
    def handler(signum, frame):
        log.info("signal %d: shutting down", signum)
        stop.set()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)


def _load(config_path: str) -> Scenario:
    try:
        return load_scenario(config_path)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# -- serve -------------------------------------------------------------------


def cmd_serve(args) -> int:
    scenario = _load(args.config)
    stop = threading.Event()
    _install_stop_handler(stop)
    try:
        store = Store(
            token=scenario.rtdb.token,
            journal_path=scenario.rtdb.journal,
            fsync=scenario.rtdb.fsync,
        )
    except Exception as exc:
        print(f"store startup failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rtdb = RtdbServer(
            store,
            host=scenario.rtdb.host,
            port=scenario.rtdb.port,
            keepalive_s=scenario.rtdb.keepalive_s,
        )
    except OSError as exc:
        print(f"cannot bind rtdb on {scenario.rtdb.host}:{scenario.rtdb.port}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rtdb.start()
    try:
        mapper = MapperService(
            rtdb.url,
            scenario.rtdb.token,
            scenario.mapper,
            host=scenario.mapper_host,
            port=scenario.mapper_port,
        )
    except OSError as exc:
        print(f"cannot bind mapper on {scenario.mapper_host}:{scenario.mapper_port}: {exc}", file=sys.stderr)
        rtdb.stop()
        return EXIT_USAGE
    mapper.start()
    print(f"rtdb listening on {rtdb.url}", flush=True)
    print(f"mapper listening on {mapper.url}", flush=True)
    try:
        stop.wait()
    finally:
        mapper.stop()
        rtdb.stop()
        print("journal flushed, bye", flush=True)
    return EXIT_OK


# -- nodes -------------------------------------------------------------------


def cmd_nodes(args) -> int:
    scenario = _load(args.config)
    if not scenario.nodes:
        print("scenario has no nodes; nothing to run", flush=True)
        return EXIT_OK
    duration_s = args.duration if args.duration is not None else scenario.duration_s
    stop = threading.Event()
    _install_stop_handler(stop)

    summaries: dict[str, dict] = {}
    threads = []
    for cfg in scenario.nodes:
        transport = RtdbClient(cfg.server_url, cfg.auth_token)
        agent = NodeAgent(cfg, transport)

        def run(agent=agent):
            summaries[agent.config.node_id] = agent.run(stop)

        t = threading.Thread(target=run, name=f"node-{cfg.node_id}", daemon=True)
        t.start()
        threads.append(t)
    print(f"running {len(threads)} node(s); Ctrl-C to stop", flush=True)

    if duration_s is not None:
        stop.wait(timeout=duration_s)
        stop.set()
    else:
        stop.wait()
    for t in threads:
        t.join(timeout=10.0)

    failed = False
    for node_id in sorted(summaries):
        summary = summaries[node_id]
        line = (
            f"{node_id}: measured={summary['measured']} published={summary['published']} "
            f"retried={summary['retried']} dropped={summary['dropped']}"
        )
        if "error" in summary:
            line += f" error={summary['error']}"
            failed = True
        print(line, flush=True)
    return EXIT_RUNTIME if failed else EXIT_OK


# -- export ------------------------------------------------------------------


def cmd_export(args) -> int:
    scenario = _load(args.config)
    client = RtdbClient(scenario.rtdb.client_url, scenario.rtdb.token)
    out = Path(args.out)
    if not out.parent.exists():
        print(f"output directory does not exist: {out.parent}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.leq:
            bucket_ms = int(_parse_duration_s(args.bucket) * 1000)
            rows = leq_summary(client, bucket_ms, args.ts_from, args.ts_to)
            with open(out, "w", encoding="utf-8") as fh:
                fh.write("node_id,bucket_start_ms,leq_db,count\n")
                for r in rows:
                    fh.write(
                        f"{r['node_id']},{r['bucket_start_ms']},{r['leq_db']},{r['count']}\n"
                    )
            print(f"wrote {len(rows)} bucket rows to {out}", flush=True)
        else:
            count = export_csv(client, out, args.ts_from, args.ts_to)
            print(f"wrote {count} rows to {out}", flush=True)
    except TransportError as exc:
        print(f"store unreachable: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# -- replay ------------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        samples = load_adc_file(args.file)
    except ValidationError as exc:
        print(f"bad sample file: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError:
        print(f"sample file not found: {args.file}", file=sys.stderr)
        return EXIT_USAGE
    n = args.block
    if len(samples) < n:
        print(
            f"file has {len(samples)} samples, shorter than one {n}-sample block",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    config = PipelineConfig(
        sample_rate_hz=args.rate,
        block_size=n,
        calibration=Calibration(offset_db=args.offset_db),
        a_weighting=args.a_weighting,
    )
    pipe = SplPipeline(config)
    block_ms = n / args.rate * 1000.0
    last_block = None
    for i in range(len(samples) // n):
        block = SampleBlock(samples[i * n : (i + 1) * n], args.rate, int(i * block_ms))
        last_block = block
        if not args.spectrum:
            reading = pipe.block_spl(block)
            print(f"{int(i * block_ms)},{reading.spl_db:.2f}")
    if args.spectrum and last_block is not None:
        windowed, _gain = apply_window(remove_dc(last_block), args.window)
        spec = power_spectrum(fht(windowed), args.rate)
        for k, p in enumerate(spec.power):
            print(f"{k * spec.bin_width_hz:.3f},{p:.6g}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonogrid",
        description="Simulated noise-mapping stack: JSON tree store, node fleet, live heat map.",
    )
    parser.add_argument("--version", action="version", version=f"sonogrid {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the store and the mapper in one process")
    serve.add_argument("--config", required=True, help="scenario/config TOML")
    serve.set_defaults(fn=cmd_serve)

    nodes = sub.add_parser("nodes", help="launch the scenario's simulated node fleet")
    nodes.add_argument("--config", required=True)
    nodes.add_argument(
        "--duration", type=_parse_duration_s, default=None, help="run cap, e.g. 60 or 2m"
    )
    nodes.set_defaults(fn=cmd_nodes)

    export = sub.add_parser("export", help="export the research log as CSV")
    export.add_argument("--config", required=True)
    export.add_argument("--out", required=True, help="output CSV path (written atomically)")
    export.add_argument("--from", dest="ts_from", type=int, default=None, help="ms epoch, inclusive")
    export.add_argument("--to", dest="ts_to", type=int, default=None, help="ms epoch, inclusive")
    export.add_argument("--leq", action="store_true", help="bucketed Leq table instead of raw rows")
    export.add_argument("--bucket", default="60s", help="Leq bucket duration (e.g. 60s, 5m)")
    export.set_defaults(fn=cmd_export)

    replay = sub.add_parser("replay", help="run the metering chain over a file of ADC counts")
    replay.add_argument("file", help="headerless file, one integer count per line")
    replay.add_argument("--rate", type=float, default=9600.0, help="sample rate in Hz")
    replay.add_argument("--block", type=int, default=256, help="block size (power of two)")
    replay.add_argument("--offset-db", type=float, default=68.83, help="calibration offset")
    replay.add_argument("--a-weighting", action="store_true")
    replay.add_argument(
        "--spectrum", action="store_true", help="emit the final block's power spectrum instead"
    )
    replay.add_argument("--window", choices=["rectangular", "hamming"], default="rectangular")
    replay.set_defaults(fn=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return EXIT_OK
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
