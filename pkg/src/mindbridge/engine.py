"""Sliding-window activation decisions and keystroke dispatch.

The classifier emits one labeled sample at a time. A fixed ten-sample window
holds the most recent labels (prefilled with Neutral so early decisions are
conservative); the activation decision is true when at least `threshold` of
those ten are the target task. An edge-triggered emitter turns decision
flanks into key events, with a refractory hold-off so one sustained thought
cannot machine-gun the key.
"""

from __future__ import annotations

import sys
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, TextIO

WINDOW_SIZE = 10
THRESHOLD_MIN = 1
THRESHOLD_MAX = 10
DEFAULT_REFRACTORY_SECONDS = 1.0


class EngineError(Exception):
    pass


class ClockRegression(EngineError):
    """Sample timestamps moved backwards."""


class InjectionUnavailable(EngineError):
    """OS-level key injection is not usable in this environment."""


class SinkClosed(EngineError):
    """Dispatch attempted on a closed sink."""


class LabelKind(Enum):
    NEUTRAL = "neutral"
    TASK = "task"


@dataclass(frozen=True)
class ClassLabel:
    kind: LabelKind
    task_name: str | None = None

    def __post_init__(self) -> None:
        if self.kind is LabelKind.TASK and not self.task_name:
            raise ValueError("task labels need a task name")
        if self.kind is LabelKind.NEUTRAL and self.task_name is not None:
            raise ValueError("neutral labels carry no task name")

    @staticmethod
    def neutral() -> "ClassLabel":
        return ClassLabel(LabelKind.NEUTRAL)

    @staticmethod
    def task(name: str) -> "ClassLabel":
        return ClassLabel(LabelKind.TASK, name)

    @staticmethod
    def from_action(action: str) -> "ClassLabel":
        if action == "neutral":
            return ClassLabel.neutral()
        return ClassLabel.task(action)


@dataclass(frozen=True)
class LabeledSample:
    time: float
    label: ClassLabel
    power: float


@dataclass(frozen=True)
class DecisionConfig:
    threshold: int
    target: ClassLabel

    def __post_init__(self) -> None:
        if not THRESHOLD_MIN <= self.threshold <= THRESHOLD_MAX:
            raise ValueError(
                f"threshold must be in [{THRESHOLD_MIN}, {THRESHOLD_MAX}], "
                f"got {self.threshold}"
            )
        if self.target.kind is not LabelKind.TASK:
            raise ValueError("decision target must be a task label")


class EvidenceWindow:
    """Last ten labels, oldest first, prefilled with Neutral."""

    def __init__(self, target: ClassLabel) -> None:
        if target.kind is not LabelKind.TASK:
            raise ValueError("window target must be a task label")
        self.target = target
        self._labels: deque[ClassLabel] = deque(
            [ClassLabel.neutral()] * WINDOW_SIZE, maxlen=WINDOW_SIZE
        )
        self._n_positive = 0

    def push(self, label: ClassLabel) -> None:
        oldest = self._labels[0]
        if oldest == self.target:
            self._n_positive -= 1
        self._labels.append(label)
        if label == self.target:
            self._n_positive += 1

    @property
    def n_positive(self) -> int:
        return self._n_positive

    @property
    def n_negative(self) -> int:
        return WINDOW_SIZE - self._n_positive

    def labels(self) -> list[ClassLabel]:
        return list(self._labels)

    def reset(self) -> None:
        self._labels.clear()
        self._labels.extend([ClassLabel.neutral()] * WINDOW_SIZE)
        self._n_positive = 0


def decide_activation(window: EvidenceWindow, config: DecisionConfig) -> bool:
    """True when at least `threshold` of the ten labels match the target."""
    return window.n_positive >= config.threshold


@dataclass(frozen=True)
class ActivationEvent:
    time: float


class Emitter:
    """Edge-triggered activation events with a refractory hold-off.

    `active` tracks the decision level every step. An event fires only on a
    false-to-true flank, and only if at least `refractory_seconds` has passed
    since the previous event; a flank inside the hold-off is swallowed, not
    deferred.
    """

    def __init__(
        self, refractory_seconds: float = DEFAULT_REFRACTORY_SECONDS
    ) -> None:
        if refractory_seconds < 0:
            raise ValueError("refractory must be non-negative")
        self.refractory_seconds = refractory_seconds
        self.active = False
        self.last_emit_time: float | None = None
        self._last_step_time: float | None = None

    def step(self, decision: bool, now: float) -> ActivationEvent | None:
        if self._last_step_time is not None and now < self._last_step_time:
            raise ClockRegression(
                f"time went backwards: {now} after {self._last_step_time}"
            )
        self._last_step_time = now
        rising = decision and not self.active
        self.active = decision
        if not rising:
            return None
        if (
            self.last_emit_time is not None
            and now - self.last_emit_time < self.refractory_seconds
        ):
            return None
        self.last_emit_time = now
        return ActivationEvent(time=now)

    def reset(self) -> None:
        self.active = False
        self.last_emit_time = None
        self._last_step_time = None


@dataclass(frozen=True)
class CommandBinding:
    activity: str
    on_key: str

    def __post_init__(self) -> None:
        if not self.on_key:
            raise ValueError("binding needs a non-empty key name")


@dataclass(frozen=True)
class KeyEvent:
    key: str
    action: str = "press"


def bind_command(binding: CommandBinding) -> KeyEvent:
    return KeyEvent(key=binding.on_key)


@dataclass(frozen=True)
class DispatchRecord:
    key: str
    time: float
    sink_id: str


class KeySink:
    """Destination for key events. Subclasses override _deliver."""

    sink_id = "null"

    def __init__(self) -> None:
        self._closed = False

    def dispatch(self, event: KeyEvent, time: float) -> DispatchRecord:
        if self._closed:
            raise SinkClosed(f"sink {self.sink_id} is closed")
        self._deliver(event, time)
        return DispatchRecord(key=event.key, time=time, sink_id=self.sink_id)

    def _deliver(self, event: KeyEvent, time: float) -> None:
        pass

    def close(self) -> None:
        self._closed = True


class RecordedSink(KeySink):
    """Keeps every dispatch in memory and, optionally, appends it to a log
    file as tab-separated `time key sink` lines (time printed as %.6f)."""

    sink_id = "recorded"

    def __init__(self, log_path: str | None = None) -> None:
        super().__init__()
        self.records: list[DispatchRecord] = []
        self._log: IO[str] | None = None
        if log_path is not None:
            self._log = open(log_path, "w", encoding="utf-8")

    def _deliver(self, event: KeyEvent, time: float) -> None:
        self.records.append(DispatchRecord(key=event.key, time=time, sink_id=self.sink_id))
        if self._log is not None:
            self._log.write(f"{time:.6f}\t{event.key}\t{self.sink_id}\n")
            self._log.flush()

    def close(self) -> None:
        super().close()
        if self._log is not None:
            self._log.close()
            self._log = None


class StdoutSink(KeySink):
    sink_id = "stdout"

    def __init__(self, stream: TextIO | None = None) -> None:
        super().__init__()
        self._stream = stream if stream is not None else sys.stdout

    def _deliver(self, event: KeyEvent, time: float) -> None:
        self._stream.write(f"{time:.6f}\t{event.key}\t{self.sink_id}\n")
        self._stream.flush()


class OsKeySink(KeySink):
    """Injects real key presses through pynput. Import happens lazily so the
    package works headless; failure raises InjectionUnavailable."""

    sink_id = "os"

    def __init__(self) -> None:
        super().__init__()
        try:
            from pynput.keyboard import Controller, Key
        except Exception as exc:
            raise InjectionUnavailable(f"pynput unavailable: {exc}") from exc
        try:
            self._controller = Controller()
        except Exception as exc:
            raise InjectionUnavailable(f"no keyboard access: {exc}") from exc
        self._special = {name.lower(): key for name, key in Key.__members__.items()}

    def _deliver(self, event: KeyEvent, time: float) -> None:
        key = self._special.get(event.key.lower(), event.key)
        self._controller.press(key)
        self._controller.release(key)


def create_sink(
    kind: str, log_path: str | None = None
) -> tuple[KeySink, str | None]:
    """Build a sink by name. Falls back to RecordedSink with a warning text
    when OS injection is unavailable; the caller decides how to surface it."""
    if kind == "recorded":
        return RecordedSink(log_path), None
    if kind == "stdout":
        return StdoutSink(), None
    if kind == "os":
        try:
            return OsKeySink(), None
        except InjectionUnavailable as exc:
            return (
                RecordedSink(log_path),
                f"os key injection unavailable ({exc}); recording instead",
            )
    raise ValueError(f"unknown sink kind {kind!r}")


@dataclass
class PipelineCounts:
    n_positive: int = 0
    n_negative: int = WINDOW_SIZE


class CommandPipeline:
    """Window + decision + emitter + binding + sink, fed one sample at a time."""

    def __init__(
        self,
        config: DecisionConfig,
        binding: CommandBinding,
        sink: KeySink,
        refractory_seconds: float = DEFAULT_REFRACTORY_SECONDS,
    ) -> None:
        self.config = config
        self.binding = binding
        self.sink = sink
        self.window = EvidenceWindow(config.target)
        self.emitter = Emitter(refractory_seconds)

    def process(self, sample: LabeledSample) -> DispatchRecord | None:
        self.window.push(sample.label)
        decision = decide_activation(self.window, self.config)
        event = self.emitter.step(decision, sample.time)
        if event is None:
            return None
        return self.sink.dispatch(bind_command(self.binding), event.time)

    def set_threshold(self, threshold: int) -> None:
        self.config = DecisionConfig(threshold=threshold, target=self.config.target)

    @property
    def counts(self) -> PipelineCounts:
        return PipelineCounts(
            n_positive=self.window.n_positive, n_negative=self.window.n_negative
        )
