"""Session lifecycle orchestration and status fan-out.

One daemon owns at most one live headset session. Stream samples and control
operations funnel through a single ordered queue consumed by the session
task, so a threshold change takes effect before the next sample and the stop
acknowledgment is a hard cut: no key dispatch can happen after it. Status
events fan out to any number of subscribers; a slow subscriber loses oldest
events and is told so with a warn entry.
"""

from __future__ import annotations

import asyncio
import time as wall_clock
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import websockets
from websockets.asyncio.client import connect

from mindbridge.daemon.profiles import ProfileRecord, ProfileStore
from mindbridge.engine import (
    THRESHOLD_MAX,
    THRESHOLD_MIN,
    WINDOW_SIZE,
    ClassLabel,
    CommandBinding,
    CommandPipeline,
    DecisionConfig,
    KeySink,
    LabeledSample,
    PipelineCounts,
)
from mindbridge.protocol import (
    ConnectedSignal,
    HandshakeMachine,
    Method,
    ProtocolError,
    ProtocolViolation,
    RpcRequest,
    RpcResponse,
    StreamEvent,
    decode_message,
    encode_request,
)


class DaemonError(Exception):
    pass


class ProfileUntrained(DaemonError):
    pass


class AlreadyRunning(DaemonError):
    pass


class NotRunning(DaemonError):
    pass


class HandshakeFailed(DaemonError):
    pass


class TrainingRejected(DaemonError):
    pass


class ThresholdOutOfRange(DaemonError):
    pass


class UnknownActivity(DaemonError):
    pass


class SessionAborted(DaemonError):
    """The session was stopped before it reached Streaming."""


class SessionFaulted(DaemonError):
    """The session died while a control operation was waiting on it."""


class StreamLost(DaemonError):
    """The transport dropped mid-stream without a clean close."""


class SessionPhase(str, Enum):
    IDLE = "Idle"
    CONNECTING = "Connecting"
    STREAMING = "Streaming"
    STOPPING = "Stopping"
    FAULTED = "Faulted"


_LEVELS = ("info", "warn", "error")


@dataclass(frozen=True)
class StatusEvent:
    time: float
    level: str
    message: str
    phase: SessionPhase
    counts: PipelineCounts | None = None

    def __post_init__(self) -> None:
        if self.level not in _LEVELS:
            raise ValueError(f"level must be one of {_LEVELS}")
        if self.counts is not None:
            if self.phase is not SessionPhase.STREAMING:
                raise ValueError("counts only accompany Streaming events")
            if self.counts.n_positive + self.counts.n_negative != WINDOW_SIZE:
                raise ValueError(f"counts must sum to {WINDOW_SIZE}")

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "time": self.time,
            "level": self.level,
            "message": self.message,
            "phase": self.phase.value,
        }
        if self.counts is not None:
            doc["counts"] = {
                "nPositive": self.counts.n_positive,
                "nNegative": self.counts.n_negative,
            }
        return doc


class StatusSubscription:
    """One subscriber's bounded view of the status stream."""

    def __init__(self, bus: "StatusBus", capacity: int) -> None:
        self._bus = bus
        self._capacity = capacity
        self._queue: asyncio.Queue[StatusEvent] = asyncio.Queue()
        self._dropped = 0

    def _offer(self, event: StatusEvent) -> None:
        while self._queue.qsize() >= self._capacity:
            try:
                self._queue.get_nowait()
                self._dropped += 1
            except asyncio.QueueEmpty:
                break
        self._queue.put_nowait(event)

    async def get(self) -> StatusEvent:
        if self._dropped:
            dropped, self._dropped = self._dropped, 0
            return StatusEvent(
                time=wall_clock.time(),
                level="warn",
                message=f"subscriber lagging, dropped {dropped} events",
                phase=self._bus.current_phase(),
                counts=None,
            )
        return await self._queue.get()

    def get_nowait(self) -> StatusEvent | None:
        try:
            return self._queue.get_nowait()
        except asyncio.QueueEmpty:
            return None

    def close(self) -> None:
        self._bus._unsubscribe(self)

    def __enter__(self) -> "StatusSubscription":
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.close()

    def __aiter__(self) -> "StatusSubscription":
        return self

    async def __anext__(self) -> StatusEvent:
        return await self.get()


class StatusBus:
    def __init__(
        self,
        capacity: int = 256,
        phase_provider: Callable[[], SessionPhase] | None = None,
    ) -> None:
        self._capacity = capacity
        self._phase_provider = phase_provider or (lambda: SessionPhase.IDLE)
        self._subs: set[StatusSubscription] = set()

    def current_phase(self) -> SessionPhase:
        return self._phase_provider()

    def publish(self, event: StatusEvent) -> None:
        for sub in list(self._subs):
            sub._offer(event)

    def subscribe(self) -> StatusSubscription:
        sub = StatusSubscription(self, self._capacity)
        self._subs.add(sub)
        return sub

    def _unsubscribe(self, sub: StatusSubscription) -> None:
        self._subs.discard(sub)


@dataclass(frozen=True)
class ActivityPreset:
    name: str
    label: str
    on_key: str


ACTIVITY_PRESETS: dict[str, ActivityPreset] = {
    preset.name: preset
    for preset in (
        ActivityPreset("youtube", "YouTube", "Space"),
        ActivityPreset("helpkidzlearn", "HelpKidzLearn", "Enter"),
        ActivityPreset("brain-joust", "Brain Joust", "Up"),
        ActivityPreset("steam", "Steam", "Space"),
    )
}


def _validate_threshold(value: Any) -> int:
    if (
        not isinstance(value, int)
        or isinstance(value, bool)
        or not THRESHOLD_MIN <= value <= THRESHOLD_MAX
    ):
        raise ThresholdOutOfRange(
            f"threshold must be an integer in [{THRESHOLD_MIN}, {THRESHOLD_MAX}], "
            f"got {value!r}"
        )
    return value


@dataclass
class _SessionRuntime:
    profile: ProfileRecord
    binding: CommandBinding
    threshold: int
    started: asyncio.Future
    queue: asyncio.Queue = field(default_factory=asyncio.Queue)
    pipeline: CommandPipeline | None = None
    task: asyncio.Task | None = None
    final_event: "StatusEvent | None" = None


class BridgeDaemon:
    """Owns the profile store, the single live session, and the status bus."""

    def __init__(
        self,
        cortex_url: str,
        store: ProfileStore,
        sink: KeySink,
        refractory_seconds: float = 1.0,
    ) -> None:
        self.cortex_url = cortex_url
        self.store = store
        self.sink = sink
        self.refractory_seconds = refractory_seconds
        self.phase = SessionPhase.IDLE
        self.bus = StatusBus(phase_provider=lambda: self.phase)
        self._session: _SessionRuntime | None = None
        self._admin_lock = asyncio.Lock()

    # ---- status helpers ----

    def _publish(
        self,
        level: str,
        message: str,
        counts: PipelineCounts | None = None,
    ) -> StatusEvent:
        event = StatusEvent(
            time=wall_clock.time(),
            level=level,
            message=message,
            phase=self.phase,
            counts=counts,
        )
        self.bus.publish(event)
        return event

    def _set_phase(
        self,
        phase: SessionPhase,
        message: str,
        level: str = "info",
        counts: PipelineCounts | None = None,
    ) -> StatusEvent:
        self.phase = phase
        return self._publish(level, message, counts)

    # ---- public operations ----

    async def start_session(
        self,
        profile_name: str,
        activity: str | None = None,
        threshold: int | None = None,
    ) -> dict[str, Any]:
        async with self._admin_lock:
            if self.phase is not SessionPhase.IDLE:
                raise AlreadyRunning(f"session is {self.phase.value}")
            profile = self.store.get(profile_name)
            if not profile.trained:
                raise ProfileUntrained(f"profile {profile_name!r} is not trained yet")
            binding = self._resolve_binding(profile, activity)
            value = (
                profile.default_threshold
                if threshold is None
                else _validate_threshold(threshold)
            )
            runtime = _SessionRuntime(
                profile=profile,
                binding=binding,
                threshold=value,
                started=asyncio.get_running_loop().create_future(),
            )
            self._session = runtime
            self._set_phase(
                SessionPhase.CONNECTING, f"connecting to {self.cortex_url}"
            )
            runtime.task = asyncio.create_task(self._run_session(runtime))
        await runtime.started
        return self.snapshot()

    async def stop_session(self) -> StatusEvent:
        async with self._admin_lock:
            if self.phase is SessionPhase.FAULTED:
                return self.reset()
            runtime = self._session
            if self.phase is SessionPhase.IDLE or runtime is None:
                raise NotRunning("no active session")
            if self.phase is SessionPhase.STOPPING:
                raise NotRunning("session is already stopping")
            if self.phase is SessionPhase.CONNECTING:
                assert runtime.task is not None
                runtime.task.cancel()
                try:
                    await runtime.task
                except asyncio.CancelledError:
                    pass
                return self._require_final(runtime)
            future = asyncio.get_running_loop().create_future()
            runtime.queue.put_nowait(("stop", future))
            return await future

    def _require_final(self, runtime: _SessionRuntime) -> StatusEvent:
        if runtime.final_event is None:
            # the task ended on the fault path; surface that to the caller
            raise SessionFaulted("session faulted during shutdown")
        return runtime.final_event

    async def set_threshold(self, value: int) -> int:
        _validate_threshold(value)
        runtime = self._session
        if self.phase is not SessionPhase.STREAMING or runtime is None:
            raise NotRunning(f"cannot set threshold while {self.phase.value}")
        future = asyncio.get_running_loop().create_future()
        runtime.queue.put_nowait(("threshold", (value, future)))
        return await future

    async def train_action(self, profile_name: str) -> ProfileRecord:
        async with self._admin_lock:
            profile = self.store.get(profile_name)
            if self.phase is not SessionPhase.IDLE:
                raise AlreadyRunning("cannot train while a session is active")
            self._publish(
                "info", f"training {profile.task_name!r} for {profile.name!r}"
            )
            try:
                async with connect(self.cortex_url) as ws:
                    await ws.send(
                        encode_request(RpcRequest(id=1, method=Method.AUTHORIZE))
                    )
                    auth = decode_message(await ws.recv())
                    if not isinstance(auth, RpcResponse) or auth.is_error:
                        raise TrainingRejected("authorization refused by server")
                    await ws.send(
                        encode_request(
                            RpcRequest(
                                id=2,
                                method=Method.TRAINING,
                                params={
                                    "profile": profile.name,
                                    "action": profile.task_name,
                                    "status": "start",
                                },
                            )
                        )
                    )
                    outcome = decode_message(await ws.recv())
                    if not isinstance(outcome, RpcResponse) or outcome.is_error:
                        detail = (
                            outcome.error.message
                            if isinstance(outcome, RpcResponse) and outcome.error
                            else "unexpected frame"
                        )
                        raise TrainingRejected(f"training refused: {detail}")
            except TrainingRejected:
                self._publish("error", f"training failed for {profile.name!r}")
                raise
            except (OSError, websockets.WebSocketException, ProtocolError) as exc:
                self._publish("error", f"training failed for {profile.name!r}")
                raise TrainingRejected(f"training connection failed: {exc}") from exc
            record = self.store.mark_trained(profile_name)
            self._publish("info", f"training complete for {profile.name!r}")
            return record

    def reset(self) -> StatusEvent:
        if self.phase is not SessionPhase.FAULTED:
            raise NotRunning("reset only applies to a faulted session")
        self._session = None
        return self._set_phase(SessionPhase.IDLE, "fault cleared, ready")

    def snapshot(self) -> dict[str, Any]:
        runtime = self._session
        threshold = None
        counts = None
        if runtime is not None:
            threshold = runtime.threshold
            if self.phase is SessionPhase.STREAMING and runtime.pipeline is not None:
                current = runtime.pipeline.counts
                counts = {
                    "nPositive": current.n_positive,
                    "nNegative": current.n_negative,
                }
        return {"phase": self.phase.value, "threshold": threshold, "counts": counts}

    def activities(self) -> list[dict[str, str]]:
        return [
            {"name": p.name, "label": p.label, "onKey": p.on_key}
            for p in ACTIVITY_PRESETS.values()
        ]

    # ---- session internals ----

    def _resolve_binding(
        self, profile: ProfileRecord, activity: str | None
    ) -> CommandBinding:
        if activity is None or activity == profile.binding.activity:
            return profile.binding
        preset = ACTIVITY_PRESETS.get(activity)
        if preset is None:
            raise UnknownActivity(f"unknown activity {activity!r}")
        return CommandBinding(activity=preset.name, on_key=preset.on_key)

    async def _run_session(self, runtime: _SessionRuntime) -> None:
        ws = None
        reader: asyncio.Task | None = None
        stop_future: asyncio.Future | None = None
        failure: Exception | None = None
        cancelled = False
        try:
            ws = await self._connect_and_handshake(runtime)
            runtime.pipeline = CommandPipeline(
                DecisionConfig(
                    threshold=runtime.threshold,
                    target=ClassLabel.task(runtime.profile.task_name),
                ),
                runtime.binding,
                self.sink,
                self.refractory_seconds,
            )
            reader = asyncio.create_task(self._read_stream(ws, runtime.queue))
            self._set_phase(
                SessionPhase.STREAMING,
                f"streaming started for profile {runtime.profile.name!r}",
                counts=runtime.pipeline.counts,
            )
            runtime.started.set_result(None)
            stop_future = await self._consume(runtime)
        except asyncio.CancelledError:
            cancelled = True
        except Exception as exc:
            failure = exc

        # teardown; the phase flips below are synchronous so no control
        # operation can slip in between the consumer dying and the new phase
        if failure is None:
            self._set_phase(
                SessionPhase.STOPPING,
                "connection attempt abandoned" if cancelled else "stopping session",
            )
        if reader is not None:
            reader.cancel()
            try:
                await reader
            except (asyncio.CancelledError, Exception):
                pass
        if ws is not None:
            await self._close_quietly(ws)
        if failure is None:
            self._session = None
            final = self._set_phase(SessionPhase.IDLE, "session closed")
            runtime.final_event = final
            if stop_future is not None and not stop_future.done():
                stop_future.set_result(final)
            if not runtime.started.done():
                runtime.started.set_exception(
                    SessionAborted("session stopped before streaming began")
                )
            self._drain_queue(runtime, final, None)
        else:
            self._session = None
            message = str(failure) or type(failure).__name__
            self._set_phase(SessionPhase.FAULTED, message, level="error")
            if not runtime.started.done():
                wrapped = (
                    failure
                    if isinstance(failure, HandshakeFailed)
                    else HandshakeFailed(message)
                )
                runtime.started.set_exception(wrapped)
            self._drain_queue(runtime, None, SessionFaulted(message))

    def _drain_queue(
        self,
        runtime: _SessionRuntime,
        final: StatusEvent | None,
        error: Exception | None,
    ) -> None:
        while True:
            try:
                kind, payload = runtime.queue.get_nowait()
            except asyncio.QueueEmpty:
                return
            if kind == "stop":
                future = payload
                if not future.done():
                    if final is not None:
                        future.set_result(final)
                    else:
                        future.set_exception(error)
            elif kind == "threshold":
                _, future = payload
                if not future.done():
                    future.set_exception(
                        NotRunning("session ended before the threshold was applied")
                    )

    async def _connect_and_handshake(self, runtime: _SessionRuntime):
        try:
            ws = await connect(self.cortex_url)
        except (OSError, websockets.WebSocketException) as exc:
            raise HandshakeFailed(
                f"cannot connect to {self.cortex_url}: {exc}"
            ) from exc
        machine = HandshakeMachine(runtime.profile.name)
        try:
            request = machine.advance(ConnectedSignal())
            while not machine.complete:
                assert request is not None
                await ws.send(encode_request(request))
                message = decode_message(await ws.recv())
                request = machine.advance(message)
            return ws
        except (ProtocolError, websockets.ConnectionClosed, OSError) as exc:
            await self._close_quietly(ws)
            raise HandshakeFailed(str(exc) or type(exc).__name__) from exc
        except BaseException:
            # cancellation mid-handshake must not leak the socket
            await self._close_quietly(ws)
            raise

    @staticmethod
    async def _close_quietly(ws) -> None:
        try:
            await ws.close()
        except Exception:
            pass

    async def _read_stream(self, ws, queue: asyncio.Queue) -> None:
        try:
            async for frame in ws:
                message = decode_message(frame)
                if isinstance(message, StreamEvent):
                    queue.put_nowait(("sample", message))
                else:
                    queue.put_nowait(
                        (
                            "fault",
                            ProtocolViolation(
                                "unexpected response frame during streaming"
                            ),
                        )
                    )
                    return
            queue.put_nowait(("eof", ws.close_reason or "connection closed"))
        except asyncio.CancelledError:
            raise
        except websockets.ConnectionClosedError as exc:
            queue.put_nowait(("fault", StreamLost(f"stream lost: {exc}")))
        except ProtocolError as exc:
            queue.put_nowait(("fault", exc))

    async def _consume(self, runtime: _SessionRuntime) -> asyncio.Future | None:
        """Process the merged sample/control queue until stop or stream end.

        Returns the pending stop future when a stop operation ended the loop,
        None when the server closed the stream; raises on faults.
        """
        pipeline = runtime.pipeline
        assert pipeline is not None
        while True:
            kind, payload = await runtime.queue.get()
            if kind == "sample":
                event: StreamEvent = payload
                sample = LabeledSample(
                    time=event.time,
                    label=ClassLabel.from_action(event.action),
                    power=event.power,
                )
                record = pipeline.process(sample)
                counts = pipeline.counts
                if record is not None:
                    self._publish(
                        "info", f"dispatched key {record.key}", counts=counts
                    )
                else:
                    self._publish("info", "sample", counts=counts)
            elif kind == "threshold":
                value, future = payload
                pipeline.set_threshold(value)
                runtime.threshold = value
                if not future.done():
                    future.set_result(value)
                self._publish(
                    "info", f"threshold set to {value}", counts=pipeline.counts
                )
            elif kind == "stop":
                return payload
            elif kind == "eof":
                self._publish(
                    "info", f"stream ended: {payload}", counts=pipeline.counts
                )
                return None
            elif kind == "fault":
                raise payload
