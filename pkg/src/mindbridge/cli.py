"""Command line entry points.

serve  run the bridge daemon with its HTTP control API
sim    run the mock headset server for a scenario file
sweep  score a scenario at every threshold and write the metrics CSV
run    headless end-to-end: embedded simulator -> daemon -> dispatch log
"""

from __future__ import annotations

import argparse
import asyncio
import sys
import tempfile
from pathlib import Path

import uvicorn

from mindbridge.daemon.control import build_app
from mindbridge.daemon.profiles import ProfileNotFound, ProfileRecord, ProfileStore
from mindbridge.daemon.session import BridgeDaemon, SessionPhase
from mindbridge.engine import CommandBinding, RecordedSink, create_sink
from mindbridge.simulator.metrics import evaluate_run, sweep_thresholds, write_metrics_csv
from mindbridge.simulator.mockserver import BindFailure, MockCortexServer
from mindbridge.simulator.scenario import ScenarioError, load_scenario

DEFAULT_CORTEX_URL = "ws://127.0.0.1:6868"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="Bridge a mental-command classification stream to keystrokes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the daemon and its control API")
    serve.add_argument("--cortex-url", default=DEFAULT_CORTEX_URL)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--control-port", type=int, default=8765)
    serve.add_argument("--profiles", default="profiles.json")
    serve.add_argument(
        "--sink", choices=["recorded", "stdout", "os"], default="recorded"
    )
    serve.add_argument(
        "--dispatch-log", default=None, help="file for recorded dispatches"
    )
    serve.add_argument(
        "--console-dir", default=None, help="static directory for the web console"
    )
    serve.add_argument("--refractory", type=float, default=1.0)

    sim = sub.add_parser("sim", help="run the mock headset server")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--host", default="127.0.0.1")
    sim.add_argument("--port", type=int, default=6868)
    sim.add_argument(
        "--accelerated",
        action="store_true",
        help="send samples as fast as the socket drains",
    )
    sim.add_argument(
        "--training-delay",
        type=float,
        default=8.0,
        help="seconds a training request takes (ignored when accelerated)",
    )

    sweep = sub.add_parser("sweep", help="score a scenario at thresholds 1..10")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--out", default="metrics.csv")

    run = sub.add_parser(
        "run", help="headless end-to-end run against an embedded simulator"
    )
    run.add_argument("--scenario", required=True)
    run.add_argument("--profile", default="headless")
    run.add_argument("--threshold", type=int, default=5)
    run.add_argument(
        "--profiles",
        default=None,
        help="profile store to use; omitted, a transient trained profile is made",
    )
    run.add_argument("--dispatch-log", default="dispatch.log")
    run.add_argument("--metrics-csv", default="metrics.csv")
    run.add_argument("--refractory", type=float, default=1.0)
    return parser


async def _serve(args: argparse.Namespace) -> int:
    store = ProfileStore(args.profiles)
    sink, warning = create_sink(args.sink, args.dispatch_log)
    if warning:
        print(warning, file=sys.stderr, flush=True)
    daemon = BridgeDaemon(
        args.cortex_url, store, sink, refractory_seconds=args.refractory
    )
    app = build_app(daemon, console_dir=args.console_dir)
    config = uvicorn.Config(
        app, host=args.host, port=args.control_port, log_level="warning"
    )
    server = uvicorn.Server(config)
    serving = asyncio.create_task(server.serve())
    while not server.started and not serving.done():
        await asyncio.sleep(0.01)
    if serving.done():
        await serving  # surfaces the bind error
        return 1
    for srv in server.servers:
        for sock in srv.sockets:
            host, port = sock.getsockname()[:2]
            print(f"control listening on http://{host}:{port}", flush=True)
    try:
        await serving
    finally:
        sink.close()
    return 0


async def _sim(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    server = MockCortexServer(
        scenario,
        host=args.host,
        port=args.port,
        accelerated=args.accelerated,
        training_delay_seconds=args.training_delay,
    )
    await server.start()
    print(f"mock cortex listening on {server.url}", flush=True)
    try:
        await asyncio.Event().wait()
    finally:
        await server.stop()
    return 0


def _sweep(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    reports = sweep_thresholds(scenario)
    write_metrics_csv(reports, args.out)
    print(f"wrote {args.out} ({len(reports)} thresholds)", flush=True)
    return 0


async def _run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    async with MockCortexServer(scenario, accelerated=True) as server:
        with tempfile.TemporaryDirectory(prefix="bridge-run-") as tmp:
            store_path = (
                Path(tmp) / "profiles.json"
                if args.profiles is None
                else Path(args.profiles)
            )
            store = ProfileStore(store_path)
            try:
                store.get(args.profile)
            except ProfileNotFound:
                store.create(
                    ProfileRecord(
                        name=args.profile,
                        task_name=scenario.task_name,
                        binding=CommandBinding(activity="youtube", on_key="Space"),
                        default_threshold=args.threshold,
                        trained=True,
                    )
                )
            sink = RecordedSink(args.dispatch_log)
            daemon = BridgeDaemon(
                server.url, store, sink, refractory_seconds=args.refractory
            )
            sub = daemon.bus.subscribe()
            await daemon.start_session(args.profile, threshold=args.threshold)

            async def until_idle() -> None:
                while daemon.phase is not SessionPhase.IDLE:
                    await sub.get()

            await asyncio.wait_for(until_idle(), timeout=300)
            sink.close()
            times = [record.time for record in sink.records]
            report = evaluate_run(scenario, times, args.threshold)
            write_metrics_csv([report], args.metrics_csv)
            mean = report.mean_latency_seconds
            print(
                f"dispatches={len(times)} "
                f"falseActivations={report.false_activations} "
                f"missedSegments={report.missed_segments} "
                f"meanLatencySeconds={'' if mean is None else f'{mean:.6f}'}",
                flush=True,
            )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return asyncio.run(_serve(args))
        if args.command == "sim":
            return asyncio.run(_sim(args))
        if args.command == "sweep":
            return _sweep(args)
        if args.command == "run":
            return asyncio.run(_run(args))
        raise AssertionError(f"unhandled command {args.command}")
    except KeyboardInterrupt:
        return 0
    except (ScenarioError, BindFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr, flush=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
