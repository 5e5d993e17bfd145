"""Acceptance gate: one test per shipping criterion, each printing a verdict.

Every test here checks an end-to-end guarantee of the released artifact, not
an implementation detail; tolerances are stated inline.
"""

import asyncio
import random
import string
import time

import pytest
from conftest import criterion
from websockets.asyncio.client import connect

from mindbridge.cli import main
from mindbridge.daemon.profiles import ProfileRecord, ProfileStore
from mindbridge.daemon.session import (
    BridgeDaemon,
    DaemonError,
    NotRunning,
    SessionFaulted,
    SessionPhase,
)
from mindbridge.engine import (
    ClassLabel,
    CommandBinding,
    CommandPipeline,
    DecisionConfig,
    EvidenceWindow,
    RecordedSink,
    decide_activation,
)
from mindbridge.protocol import (
    ConnectedSignal,
    HandshakeMachine,
    ProtocolError,
    decode_message,
    encode_request,
)
from mindbridge.simulator.mockserver import MockCortexServer
from mindbridge.simulator.scenario import Scenario, Segment, generate_stream, save_scenario
from mindbridge.simulator.metrics import sweep_thresholds

TASK = ClassLabel.task("push")
NEUTRAL = ClassLabel.neutral()


def run(coro, timeout=120):
    return asyncio.run(asyncio.wait_for(coro, timeout=timeout))


def test_decision_rule_oracle():
    with criterion(
        "decision rule: all 1024 windows x thresholds 1..10 match brute force, <1s"
    ):
        start = time.perf_counter()
        mismatches = 0
        for bits in range(1024):
            labels = [
                TASK if (bits >> i) & 1 else NEUTRAL for i in range(10)
            ]
            window = EvidenceWindow(TASK)
            for label in labels:
                window.push(label)
            positives = sum(1 for label in labels if label == TASK)
            for threshold in range(1, 11):
                got = decide_activation(window, DecisionConfig(threshold, TASK))
                if got != (positives >= threshold):
                    mismatches += 1
        elapsed = time.perf_counter() - start
        assert mismatches == 0
        assert elapsed < 1.0, f"oracle sweep took {elapsed:.3f}s"


def test_recency_oracle():
    with criterion(
        "recency: engine decisions equal trailing-10 recount on 1000 streams of 50"
    ):
        rng = random.Random(0xBEEF)
        mismatches = 0
        for _ in range(1000):
            bias = rng.random()
            labels = [
                TASK if rng.random() < bias else NEUTRAL for _ in range(50)
            ]
            padded = [NEUTRAL] * 10 + labels
            window = EvidenceWindow(TASK)
            for i, label in enumerate(labels):
                window.push(label)
                trailing = padded[i + 1 : i + 11]
                oracle_count = sum(1 for lab in trailing if lab == TASK)
                for threshold in range(1, 11):
                    engine = decide_activation(
                        window, DecisionConfig(threshold, TASK)
                    )
                    if engine != (oracle_count >= threshold):
                        mismatches += 1
        assert mismatches == 0


def _noisy_scenario(seed):
    rng = random.Random(seed)
    segments = []
    for i in range(6):
        intent = "task" if i % 2 else "neutral"
        segments.append(
            Segment(
                intent=intent,
                duration_seconds=2.0 + rng.random() * 3.0,
                flip_probability=0.1 + rng.random() * 0.3,
            )
        )
    return Scenario(
        name=f"noisy-{seed}",
        rate_hz=10.0,
        seed=seed,
        segments=tuple(segments),
        task_name="push",
    )


def test_per_sample_threshold_monotonicity():
    with criterion(
        "monotonicity: activation sets nest across adjacent thresholds, "
        "100 seeded noisy scenarios, 0 violations"
    ):
        violations = 0
        for seed in range(100):
            samples = generate_stream(_noisy_scenario(seed))
            active = {}
            for threshold in range(1, 11):
                window = EvidenceWindow(TASK)
                config = DecisionConfig(threshold, TASK)
                indices = set()
                for i, sample in enumerate(samples):
                    window.push(sample.label)
                    if decide_activation(window, config):
                        indices.add(i)
                active[threshold] = indices
            for threshold in range(2, 11):
                if not active[threshold] <= active[threshold - 1]:
                    violations += 1
        assert violations == 0


def test_zero_noise_latency():
    with criterion(
        "zero-noise latency: first key for threshold t lands at sample index "
        "t-1 exactly, t=1..10"
    ):
        scenario = Scenario(
            name="pure-task",
            rate_hz=10.0,
            seed=0,
            segments=(Segment("task", 2.0),),
            task_name="push",
        )
        samples = generate_stream(scenario)
        for threshold in range(1, 11):
            sink = RecordedSink()
            pipeline = CommandPipeline(
                DecisionConfig(threshold=threshold, target=TASK),
                CommandBinding(activity="youtube", on_key="Space"),
                sink,
            )
            for sample in samples:
                pipeline.process(sample)
            assert sink.records, f"threshold {threshold} never dispatched"
            assert sink.records[0].time == samples[threshold - 1].time


GOLDEN_HANDSHAKE = [
    b'{"jsonrpc":"2.0","id":1,"method":"authorize","params":{}}',
    b'{"jsonrpc":"2.0","id":2,"method":"queryHeadsets","params":{}}',
    b'{"jsonrpc":"2.0","id":3,"method":"setupProfile",'
    b'"params":{"profile":"alex","status":"load"}}',
    b'{"jsonrpc":"2.0","id":4,"method":"createSession",'
    b'"params":{"headset":"SIM-0001","status":"open"}}',
    b'{"jsonrpc":"2.0","id":5,"method":"subscribe",'
    b'"params":{"session":"s-1","streams":["com"]}}',
]


def test_protocol_conformance():
    with criterion(
        "protocol: golden 5-request handshake bit-exact; 1e5 fuzz frames "
        "raise only typed errors"
    ):
        async def drive():
            scenario = Scenario(
                name="golden",
                rate_hz=10.0,
                seed=0,
                segments=(Segment("task", 0.3),),
            )
            sent = []
            async with MockCortexServer(scenario, accelerated=True) as server:
                async with connect(server.url) as ws:
                    machine = HandshakeMachine("alex")
                    request = machine.advance(ConnectedSignal())
                    while not machine.complete:
                        frame = encode_request(request)
                        sent.append(frame)
                        await ws.send(frame)
                        request = machine.advance(
                            decode_message(await ws.recv())
                        )
            return sent

        sent = run(drive())
        assert sent == GOLDEN_HANDSHAKE

        rng = random.Random(0x5EED)
        printable = string.printable
        json_bits = [
            '{"sid":"s","time":1.0,"com":["push",0.5]}',
            '{"jsonrpc":"2.0","id":3,"result":{"id":"s-1"}}',
            '{"id":',
            '"com":[',
            "null",
            "[1,2",
            '{"error"',
        ]
        for _ in range(100_000):
            kind = rng.randrange(3)
            if kind == 0:
                blob = rng.randbytes(rng.randrange(0, 64))
            elif kind == 1:
                blob = "".join(
                    rng.choice(printable) for _ in range(rng.randrange(0, 48))
                ).encode()
            else:
                base = list(rng.choice(json_bits).encode())
                for _ in range(rng.randrange(0, 6)):
                    if base:
                        base[rng.randrange(len(base))] = rng.randrange(256)
                blob = bytes(base)
            try:
                decode_message(blob)
            except ProtocolError:
                pass
            # any other exception type escapes and fails the test


LEGAL_EDGES = {
    (SessionPhase.IDLE, SessionPhase.CONNECTING),
    (SessionPhase.CONNECTING, SessionPhase.STREAMING),
    (SessionPhase.CONNECTING, SessionPhase.STOPPING),
    (SessionPhase.STREAMING, SessionPhase.STOPPING),
    (SessionPhase.STOPPING, SessionPhase.IDLE),
    (SessionPhase.IDLE, SessionPhase.FAULTED),
    (SessionPhase.CONNECTING, SessionPhase.FAULTED),
    (SessionPhase.STREAMING, SessionPhase.FAULTED),
    (SessionPhase.STOPPING, SessionPhase.FAULTED),
    (SessionPhase.FAULTED, SessionPhase.IDLE),
}


def test_lifecycle_safety(tmp_path):
    with criterion(
        "lifecycle: 100 random start/stop/threshold schedules, dispatch "
        "frozen at stop ack, counts sum 10, phase paths legal"
    ):
        async def one_schedule(rng, url, store):
            sink = RecordedSink()
            daemon = BridgeDaemon(url, store, sink)
            sub = daemon.bus.subscribe()
            abandon = rng.random() < 0.25
            start_task = None
            if abandon:
                start_task = asyncio.ensure_future(
                    daemon.start_session("alex", threshold=rng.randint(1, 10))
                )
                await asyncio.sleep(rng.random() * 0.004)
            else:
                await daemon.start_session("alex", threshold=rng.randint(1, 10))
                for _ in range(rng.randrange(4)):
                    await asyncio.sleep(rng.random() * 0.03)
                    try:
                        await daemon.set_threshold(rng.randint(1, 10))
                    except NotRunning:
                        pass
            try:
                final = await daemon.stop_session()
                assert final.phase is SessionPhase.IDLE
            except (NotRunning, SessionFaulted):
                pass
            if start_task is not None:
                try:
                    await start_task
                except DaemonError:
                    pass
            frozen = len(sink.records)
            await asyncio.sleep(0.03)
            assert len(sink.records) == frozen, "dispatch after stop ack"

            events = []
            while (event := sub.get_nowait()) is not None:
                events.append(event)
            for event in events:
                if event.counts is not None:
                    total = event.counts.n_positive + event.counts.n_negative
                    assert total == 10, "counts do not sum to 10"
            phases = [SessionPhase.IDLE]
            for event in events:
                if event.phase is not phases[-1]:
                    phases.append(event.phase)
            for a, b in zip(phases, phases[1:]):
                assert (a, b) in LEGAL_EDGES, f"illegal transition {a}->{b}"
            sub.close()
            sink.close()

        async def all_schedules():
            store = ProfileStore(tmp_path / "profiles.json")
            store.create(
                ProfileRecord(
                    name="alex",
                    task_name="push",
                    binding=CommandBinding(activity="youtube", on_key="Space"),
                    default_threshold=3,
                    trained=True,
                )
            )
            segments = tuple(
                Segment("task", 1.5) if i % 2 else Segment("neutral", 1.5)
                for i in range(80)
            )
            scenario = Scenario(
                name="lifecycle",
                rate_hz=100.0,
                seed=5,
                segments=segments,
                task_name="push",
            )
            rng = random.Random(0xD1CE)
            async with MockCortexServer(scenario, accelerated=False) as server:
                for _ in range(100):
                    await one_schedule(rng, server.url, store)

        run(all_schedules(), timeout=300)


def test_end_to_end_determinism(tmp_path):
    with criterion(
        "determinism: two headless runs on one scenario+seed give "
        "byte-identical dispatch log and metrics CSV"
    ):
        scenario = Scenario(
            name="repeat",
            rate_hz=10.0,
            seed=77,
            segments=(
                Segment("neutral", 4.0, 0.2),
                Segment("task", 6.0, 0.25),
                Segment("neutral", 4.0, 0.2),
                Segment("task", 6.0, 0.15),
            ),
            task_name="push",
        )
        scenario_path = tmp_path / "scenario.json"
        save_scenario(scenario, scenario_path)
        outputs = []
        for tag in ("first", "second"):
            log = tmp_path / f"{tag}.log"
            csv = tmp_path / f"{tag}.csv"
            code = main(
                [
                    "run",
                    "--scenario",
                    str(scenario_path),
                    "--threshold",
                    "3",
                    "--dispatch-log",
                    str(log),
                    "--metrics-csv",
                    str(csv),
                ]
            )
            assert code == 0
            outputs.append((log.read_bytes(), csv.read_bytes()))
        assert outputs[0][0] == outputs[1][0], "dispatch logs differ"
        assert outputs[0][1] == outputs[1][1], "metrics CSVs differ"
        assert outputs[0][0], "dispatch log unexpectedly empty"


def test_sweep_sanity():
    with criterion(
        "sweep sanity: pure-neutral all-zero; spaced zero-noise tasks never "
        "missed; 60s sweep under 5s"
    ):
        neutral_only = Scenario(
            name="calm",
            rate_hz=10.0,
            seed=1,
            segments=(
                Segment("neutral", 10.0),
                Segment("neutral", 10.0),
                Segment("neutral", 10.0),
            ),
        )
        for report in sweep_thresholds(neutral_only):
            assert report.false_activations == 0
            assert report.missed_segments == 0

        # >=1s task bursts with >=1s neutral gaps: every threshold detects
        # every burst (window refills inside the burst, gap clears it)
        spaced = Scenario(
            name="spaced",
            rate_hz=10.0,
            seed=2,
            segments=(
                Segment("neutral", 2.0),
                Segment("task", 1.5),
                Segment("neutral", 2.0),
                Segment("task", 1.5),
                Segment("neutral", 2.0),
                Segment("task", 1.5),
                Segment("neutral", 2.0),
            ),
        )
        for report in sweep_thresholds(spaced):
            assert report.missed_segments == 0
            assert report.false_activations == 0

        rng = random.Random(3)
        segments = []
        remaining = 60.0
        while remaining > 0:
            duration = min(remaining, 2.0 + rng.random() * 4.0)
            segments.append(
                Segment(
                    intent="task" if len(segments) % 2 else "neutral",
                    duration_seconds=duration,
                    flip_probability=0.25,
                )
            )
            remaining -= duration
        minute = Scenario(
            name="minute", rate_hz=10.0, seed=4, segments=tuple(segments)
        )
        start = time.perf_counter()
        reports = sweep_thresholds(minute)
        elapsed = time.perf_counter() - start
        assert len(reports) == 10
        assert elapsed < 5.0, f"sweep took {elapsed:.2f}s"
