import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mindbridge.engine import ClassLabel, LabelKind
from mindbridge.simulator.metrics import (
    CSV_HEADER,
    MetricsReport,
    evaluate_run,
    metrics_csv_text,
    run_through_pipeline,
    sweep_thresholds,
    write_metrics_csv,
)
from mindbridge.simulator.scenario import (
    Scenario,
    ScenarioError,
    Segment,
    generate_stream,
    load_scenario,
    save_scenario,
    segment_sample_count,
)


def scenario(segments, seed=0, rate=10.0, name="t"):
    return Scenario(name=name, rate_hz=rate, seed=seed, segments=tuple(segments))


NEUTRAL_5S = Segment(intent="neutral", duration_seconds=5.0)
TASK_5S = Segment(intent="task", duration_seconds=5.0)


class TestSegment:
    def test_validation(self):
        with pytest.raises(ValueError):
            Segment(intent="rest", duration_seconds=1.0)
        with pytest.raises(ValueError):
            Segment(intent="task", duration_seconds=0.0)
        with pytest.raises(ValueError):
            Segment(intent="task", duration_seconds=1.0, flip_probability=0.6)
        with pytest.raises(ValueError):
            Segment(intent="task", duration_seconds=1.0, power_mean=1.5)

    def test_sample_count_floor(self):
        assert segment_sample_count(Segment("task", 1.0), 10.0) == 10
        assert segment_sample_count(Segment("task", 0.95), 10.0) == 9
        assert segment_sample_count(Segment("task", 0.3), 10.0) == 3  # float dust
        assert segment_sample_count(Segment("task", 2.5), 2.0) == 5


class TestScenario:
    def test_validation(self):
        with pytest.raises(ValueError):
            Scenario(name="", segments=(TASK_5S,))
        with pytest.raises(ValueError):
            Scenario(name="x", segments=())
        with pytest.raises(ValueError):
            Scenario(name="x", segments=(TASK_5S,), rate_hz=0)
        with pytest.raises(ValueError):
            Scenario(name="x", segments=(TASK_5S,), task_name="neutral")

    def test_duration(self):
        sc = scenario([NEUTRAL_5S, TASK_5S])
        assert sc.duration_seconds == 10.0

    def test_round_trip_file(self, tmp_path):
        sc = scenario(
            [
                Segment("neutral", 2.0, 0.1, 0.3),
                Segment("task", 3.0, 0.05, 0.9),
            ],
            seed=42,
        )
        path = tmp_path / "sc.json"
        save_scenario(sc, path)
        assert load_scenario(path) == sc

    def test_json_uses_camel_case(self, tmp_path):
        path = tmp_path / "sc.json"
        save_scenario(scenario([TASK_5S], seed=7), path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"name", "rateHz", "seed", "segments"}
        assert set(doc["segments"][0]) == {
            "intent",
            "durationSeconds",
            "flipProbability",
            "powerMean",
        }

    def test_task_name_extension_survives_round_trip(self, tmp_path):
        sc = Scenario(name="x", segments=(TASK_5S,), task_name="push")
        path = tmp_path / "sc.json"
        save_scenario(sc, path)
        assert json.loads(path.read_text())["taskName"] == "push"
        assert load_scenario(path).task_name == "push"

    def test_load_errors(self, tmp_path):
        missing = tmp_path / "nope.json"
        with pytest.raises(ScenarioError):
            load_scenario(missing)
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        with pytest.raises(ScenarioError):
            load_scenario(bad)
        wrong = tmp_path / "wrong.json"
        wrong.write_text('{"segments": "none"}')
        with pytest.raises(ScenarioError):
            load_scenario(wrong)


class TestGeneration:
    def test_sample_count_and_times(self):
        sc = scenario([Segment("neutral", 1.0), Segment("task", 0.5)])
        samples = generate_stream(sc)
        assert len(samples) == 15
        assert samples[0].time == 0.0
        assert samples[9].time == pytest.approx(0.9)
        assert samples[10].time == pytest.approx(1.0)  # second segment starts
        assert samples[14].time == pytest.approx(1.4)

    def test_zero_flip_is_pure(self):
        sc = scenario([Segment("task", 2.0), Segment("neutral", 1.0)])
        samples = generate_stream(sc)
        assert all(s.label.kind is LabelKind.TASK for s in samples[:20])
        assert all(s.label.kind is LabelKind.NEUTRAL for s in samples[20:])

    def test_power_is_segment_mean(self):
        sc = scenario([Segment("task", 1.0, power_mean=0.73)])
        assert all(s.power == 0.73 for s in generate_stream(sc))

    def test_same_seed_same_stream(self):
        sc = scenario([Segment("task", 10.0, flip_probability=0.3)], seed=99)
        assert generate_stream(sc) == generate_stream(sc)

    def test_different_seed_differs(self):
        base = [Segment("task", 10.0, flip_probability=0.3)]
        a = generate_stream(scenario(base, seed=1))
        b = generate_stream(scenario(base, seed=2))
        assert a != b

    def test_custom_task_name_in_labels(self):
        sc = Scenario(name="x", segments=(Segment("task", 0.5),), task_name="lift")
        labels = {s.label for s in generate_stream(sc)}
        assert labels == {ClassLabel.task("lift")}

    @settings(max_examples=60)
    @given(
        seed=st.integers(min_value=0, max_value=2**31),
        flip=st.floats(min_value=0.0, max_value=0.5, allow_nan=False),
    )
    def test_flip_only_swaps_between_task_and_neutral(self, seed, flip):
        sc = scenario(
            [Segment("task", 3.0, flip_probability=flip)], seed=seed
        )
        kinds = {s.label.kind for s in generate_stream(sc)}
        assert kinds <= {LabelKind.TASK, LabelKind.NEUTRAL}

    @settings(max_examples=40)
    @given(seed=st.integers(min_value=0, max_value=2**31))
    def test_flip_rate_roughly_matches_probability(self, seed):
        sc = scenario(
            [Segment("task", 100.0, flip_probability=0.25)], seed=seed
        )
        samples = generate_stream(sc)
        flipped = sum(1 for s in samples if s.label.kind is LabelKind.NEUTRAL)
        assert 0.15 <= flipped / len(samples) <= 0.35

    def test_times_strictly_increase(self):
        sc = scenario([Segment("neutral", 1.3), Segment("task", 2.7)], rate=7.0)
        samples = generate_stream(sc)
        for a, b in zip(samples, samples[1:]):
            assert b.time > a.time


class TestMetrics:
    def test_false_activation_in_neutral_segment(self):
        sc = scenario([NEUTRAL_5S, TASK_5S])
        rep = evaluate_run(sc, [1.0, 2.0, 6.0], threshold=3)
        assert rep.false_activations == 2
        assert rep.missed_segments == 0
        assert rep.detection_latencies == (1.0,)

    def test_missed_task_segment(self):
        sc = scenario([TASK_5S, NEUTRAL_5S, TASK_5S])
        rep = evaluate_run(sc, [0.5], threshold=3)
        assert rep.missed_segments == 1
        assert rep.detection_latencies == (0.5,)

    def test_boundary_belongs_to_next_segment(self):
        sc = scenario([NEUTRAL_5S, TASK_5S])
        rep = evaluate_run(sc, [5.0], threshold=1)
        assert rep.false_activations == 0
        assert rep.missed_segments == 0
        assert rep.detection_latencies == (0.0,)

    def test_latency_uses_first_dispatch(self):
        sc = scenario([TASK_5S])
        rep = evaluate_run(sc, [2.5, 1.25, 4.0], threshold=1)
        assert rep.detection_latencies == (1.25,)

    def test_out_of_range_dispatch_rejected(self):
        sc = scenario([TASK_5S])
        with pytest.raises(ValueError):
            evaluate_run(sc, [5.5], threshold=1)
        with pytest.raises(ValueError):
            evaluate_run(sc, [-0.1], threshold=1)

    def test_mean_latency(self):
        rep = MetricsReport(1, 0, 0, (1.0, 2.0, 3.0))
        assert rep.mean_latency_seconds == pytest.approx(2.0)
        assert MetricsReport(1, 0, 2, ()).mean_latency_seconds is None

    def test_sweep_covers_all_thresholds(self):
        sc = scenario([TASK_5S, NEUTRAL_5S])
        reports = sweep_thresholds(sc)
        assert [r.threshold for r in reports] == list(range(1, 11))

    def test_zero_noise_task_latency_matches_threshold(self):
        # pure task segment: threshold t first satisfied at sample t-1,
        # i.e. (t-1)/rate seconds after segment start
        sc = scenario([TASK_5S])
        for rep in sweep_thresholds(sc):
            assert rep.missed_segments == 0
            expected = (rep.threshold - 1) / 10.0
            assert rep.detection_latencies[0] == pytest.approx(expected)

    def test_pure_neutral_sweep_is_silent(self):
        sc = scenario([NEUTRAL_5S, NEUTRAL_5S])
        for rep in sweep_thresholds(sc):
            assert rep.false_activations == 0
            assert rep.missed_segments == 0
            assert rep.detection_latencies == ()

    def test_csv_shape(self, tmp_path):
        sc = scenario([TASK_5S])
        reports = sweep_thresholds(sc)
        path = tmp_path / "out.csv"
        write_metrics_csv(reports, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 11
        first = lines[1].split(",")
        assert first[0] == "1" and first[3] == "0.000000"

    def test_csv_empty_mean_is_blank(self):
        text = metrics_csv_text([MetricsReport(4, 2, 1, ())])
        assert text.splitlines()[1] == "4,2,1,"

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**31))
    def test_extreme_thresholds_order_false_activations(self, seed):
        # strictest threshold can never produce more noise events than the
        # loosest one on the same stream
        sc = scenario(
            [
                Segment("neutral", 6.0, flip_probability=0.3),
                Segment("task", 4.0, flip_probability=0.2),
                Segment("neutral", 6.0, flip_probability=0.3),
            ],
            seed=seed,
        )
        reports = sweep_thresholds(sc)
        assert reports[9].false_activations <= reports[0].false_activations

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**31))
    def test_per_sample_decision_sets_nest_across_thresholds(self, seed):
        from mindbridge.engine import (
            DecisionConfig,
            EvidenceWindow,
            decide_activation,
        )

        sc = scenario(
            [
                Segment("neutral", 4.0, flip_probability=0.4),
                Segment("task", 4.0, flip_probability=0.4),
            ],
            seed=seed,
        )
        samples = generate_stream(sc)
        target = ClassLabel.task(sc.task_name)
        active: dict[int, set[int]] = {}
        for threshold in range(1, 11):
            w = EvidenceWindow(target)
            cfg = DecisionConfig(threshold, target)
            active[threshold] = {
                i
                for i, s in enumerate(samples)
                if (w.push(s.label) or decide_activation(w, cfg))
            }
        for threshold in range(2, 11):
            assert active[threshold] <= active[threshold - 1]


class TestPipelineRun:
    def test_run_through_pipeline_returns_times(self):
        sc = scenario([TASK_5S])
        times = run_through_pipeline(generate_stream(sc), sc, threshold=3)
        assert times == [pytest.approx(0.2)]
