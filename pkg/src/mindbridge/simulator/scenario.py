"""Scenario files and deterministic stream generation.

A scenario is a seeded script of intent segments. Generation walks the
segments in order, emits floor(duration * rate) samples per segment at
uniform spacing, and flips each sample's intended label with the segment's
flip probability using one random.Random(seed) shared across the whole run.
Same file, same seed, same stream, always.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from mindbridge.engine import ClassLabel, LabeledSample

DEFAULT_RATE_HZ = 10.0
DEFAULT_TASK_NAME = "task"
# guards float dust in duration * rate so 0.3 * 10 still yields 3 samples
_COUNT_EPSILON = 1e-9

INTENT_NEUTRAL = "neutral"
INTENT_TASK = "task"


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class Segment:
    intent: str
    duration_seconds: float
    flip_probability: float = 0.0
    power_mean: float = 0.8

    def __post_init__(self) -> None:
        if self.intent not in (INTENT_NEUTRAL, INTENT_TASK):
            raise ValueError(f"intent must be neutral or task, got {self.intent!r}")
        if self.duration_seconds <= 0:
            raise ValueError("duration must be positive")
        if not 0.0 <= self.flip_probability <= 0.5:
            raise ValueError("flip probability must be in [0, 0.5]")
        if not 0.0 <= self.power_mean <= 1.0:
            raise ValueError("power mean must be in [0, 1]")


@dataclass(frozen=True)
class Scenario:
    name: str
    rate_hz: float = DEFAULT_RATE_HZ
    seed: int = 0
    segments: tuple[Segment, ...] = field(default_factory=tuple)
    task_name: str = DEFAULT_TASK_NAME

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("scenario needs a name")
        if self.rate_hz <= 0:
            raise ValueError("rate must be positive")
        if not self.segments:
            raise ValueError("scenario needs at least one segment")
        if not self.task_name or self.task_name == INTENT_NEUTRAL:
            raise ValueError("task name must be non-empty and not 'neutral'")

    @property
    def duration_seconds(self) -> float:
        return sum(seg.duration_seconds for seg in self.segments)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "name": self.name,
            "rateHz": self.rate_hz,
            "seed": self.seed,
            "segments": [
                {
                    "intent": seg.intent,
                    "durationSeconds": seg.duration_seconds,
                    "flipProbability": seg.flip_probability,
                    "powerMean": seg.power_mean,
                }
                for seg in self.segments
            ],
        }
        if self.task_name != DEFAULT_TASK_NAME:
            doc["taskName"] = self.task_name
        return doc

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> "Scenario":
        try:
            segments = tuple(
                Segment(
                    intent=s["intent"],
                    duration_seconds=s["durationSeconds"],
                    flip_probability=s.get("flipProbability", 0.0),
                    power_mean=s.get("powerMean", 0.8),
                )
                for s in doc["segments"]
            )
            return Scenario(
                name=doc["name"],
                rate_hz=doc.get("rateHz", DEFAULT_RATE_HZ),
                seed=doc.get("seed", 0),
                segments=segments,
                task_name=doc.get("taskName", DEFAULT_TASK_NAME),
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"bad scenario document: {exc}") from exc
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be an object")
    return Scenario.from_dict(doc)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def segment_sample_count(segment: Segment, rate_hz: float) -> int:
    return math.floor(segment.duration_seconds * rate_hz + _COUNT_EPSILON)


def generate_stream(scenario: Scenario) -> list[LabeledSample]:
    """Expand a scenario into its full labeled sample stream."""
    rng = random.Random(scenario.seed)
    task = ClassLabel.task(scenario.task_name)
    neutral = ClassLabel.neutral()
    samples: list[LabeledSample] = []
    segment_start = 0.0
    for seg in scenario.segments:
        intended = task if seg.intent == INTENT_TASK else neutral
        flipped = neutral if seg.intent == INTENT_TASK else task
        for k in range(segment_sample_count(seg, scenario.rate_hz)):
            label = intended
            if seg.flip_probability > 0 and rng.random() < seg.flip_probability:
                label = flipped
            samples.append(
                LabeledSample(
                    time=segment_start + k / scenario.rate_hz,
                    label=label,
                    power=seg.power_mean,
                )
            )
        segment_start += seg.duration_seconds
    return samples
