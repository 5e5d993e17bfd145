"""Detection quality metrics for a dispatch log replayed against its scenario.

Segments are treated as half-open intervals [start, end) on the stream
clock. A dispatch inside a neutral segment is a false activation; a task
segment with no dispatch inside it is missed; latency is measured from
segment start to its first dispatch.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from mindbridge.engine import (
    ClassLabel,
    CommandBinding,
    CommandPipeline,
    DecisionConfig,
    LabeledSample,
    RecordedSink,
)
from mindbridge.simulator.scenario import INTENT_TASK, Scenario, generate_stream

CSV_HEADER = ["threshold", "falseActivations", "missedSegments", "meanLatencySeconds"]


@dataclass(frozen=True)
class MetricsReport:
    threshold: int
    false_activations: int
    missed_segments: int
    detection_latencies: tuple[float, ...] = field(default_factory=tuple)

    @property
    def mean_latency_seconds(self) -> float | None:
        if not self.detection_latencies:
            return None
        return sum(self.detection_latencies) / len(self.detection_latencies)


def evaluate_run(
    scenario: Scenario, dispatch_times: list[float], threshold: int
) -> MetricsReport:
    """Score one run's dispatch timestamps against the scenario's segments."""
    total = scenario.duration_seconds
    for t in dispatch_times:
        if not 0.0 <= t < total + 1e-9:
            raise ValueError(f"dispatch at {t} falls outside the scenario")
    times = sorted(dispatch_times)
    false_activations = 0
    missed = 0
    latencies: list[float] = []
    start = 0.0
    for seg in scenario.segments:
        end = start + seg.duration_seconds
        inside = [t for t in times if start <= t < end]
        if seg.intent == INTENT_TASK:
            if inside:
                latencies.append(inside[0] - start)
            else:
                missed += 1
        else:
            false_activations += len(inside)
        start = end
    return MetricsReport(
        threshold=threshold,
        false_activations=false_activations,
        missed_segments=missed,
        detection_latencies=tuple(latencies),
    )


def run_through_pipeline(
    samples: list[LabeledSample], scenario: Scenario, threshold: int
) -> list[float]:
    """Feed a pregenerated stream through a fresh pipeline, return dispatch times."""
    sink = RecordedSink()
    pipe = CommandPipeline(
        DecisionConfig(threshold=threshold, target=ClassLabel.task(scenario.task_name)),
        CommandBinding(activity="sweep", on_key="Space"),
        sink,
    )
    for sample in samples:
        pipe.process(sample)
    return [rec.time for rec in sink.records]


def sweep_thresholds(
    scenario: Scenario, samples: list[LabeledSample] | None = None
) -> list[MetricsReport]:
    """Run every threshold 1..10 against the same generated stream."""
    if samples is None:
        samples = generate_stream(scenario)
    reports = []
    for threshold in range(1, 11):
        times = run_through_pipeline(samples, scenario, threshold)
        reports.append(evaluate_run(scenario, times, threshold))
    return reports


def metrics_csv_text(reports: list[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rep in reports:
        mean = rep.mean_latency_seconds
        writer.writerow(
            [
                rep.threshold,
                rep.false_activations,
                rep.missed_segments,
                "" if mean is None else f"{mean:.6f}",
            ]
        )
    return buf.getvalue()


def write_metrics_csv(reports: list[MetricsReport], path: str | Path) -> None:
    Path(path).write_text(metrics_csv_text(reports), encoding="utf-8")
