"""Mock headset server: speaks the RPC handshake, then streams a scenario.

Each client connection gets its own handshake state and its own playback of
the scenario. Paced mode sends samples on the stream clock with drift
correction; accelerated mode sends them as fast as the socket drains. After
the last sample the server closes the connection with code 1000 and a
"session closed" reason.
"""

from __future__ import annotations

import asyncio
import json
import logging
import secrets
from typing import Any

import websockets
from websockets.asyncio.server import Server, ServerConnection, serve

from mindbridge.engine import LabelKind
from mindbridge.protocol import (
    COM_STREAM,
    NEUTRAL_ACTION,
    Method,
    RpcError,
    RpcResponse,
    StreamEvent,
    encode_event,
    encode_response,
)
from mindbridge.simulator.scenario import Scenario, generate_stream

log = logging.getLogger(__name__)

DEFAULT_TRAINING_DELAY_SECONDS = 8.0
SESSION_CLOSED_REASON = "session closed: scenario complete"


class BindFailure(Exception):
    """The requested listen address could not be bound."""


class _ClientState:
    def __init__(self) -> None:
        self.token: str | None = None
        self.session_id: str | None = None
        self.streaming = False
        self.stream_task: asyncio.Task | None = None


class MockCortexServer:
    """Serves one scenario to any number of concurrent clients."""

    def __init__(
        self,
        scenario: Scenario,
        host: str = "127.0.0.1",
        port: int = 0,
        accelerated: bool = False,
        training_delay_seconds: float = DEFAULT_TRAINING_DELAY_SECONDS,
    ) -> None:
        self.scenario = scenario
        self.host = host
        self.port = port
        self.accelerated = accelerated
        self.training_delay_seconds = training_delay_seconds
        self._server: Server | None = None
        self._samples = generate_stream(scenario)

    async def start(self) -> None:
        try:
            self._server = await serve(self._handle, self.host, self.port)
        except OSError as exc:
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        self.port = next(
            sock.getsockname()[1] for sock in self._server.sockets
        )

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}"

    async def __aenter__(self) -> "MockCortexServer":
        await self.start()
        return self

    async def __aexit__(self, *exc_info: Any) -> None:
        await self.stop()

    async def _handle(self, ws: ServerConnection) -> None:
        state = _ClientState()
        send_lock = asyncio.Lock()
        try:
            async for frame in ws:
                await self._handle_frame(ws, state, send_lock, frame)
        except websockets.ConnectionClosed:
            pass
        finally:
            if state.stream_task is not None:
                state.stream_task.cancel()
                try:
                    await state.stream_task
                except (asyncio.CancelledError, websockets.ConnectionClosed):
                    pass

    async def _handle_frame(
        self,
        ws: ServerConnection,
        state: _ClientState,
        send_lock: asyncio.Lock,
        frame: bytes | str,
    ) -> None:
        req = self._parse_request(frame)
        if req is None:
            await ws.close(1002, "expected a request frame")
            return
        rid, method, params = req
        handler = {
            Method.AUTHORIZE.value: self._on_authorize,
            Method.QUERY_HEADSETS.value: self._on_query_headsets,
            Method.QUERY_PROFILE.value: self._on_query_profile,
            Method.SETUP_PROFILE.value: self._on_setup_profile,
            Method.CREATE_SESSION.value: self._on_create_session,
            Method.TRAINING.value: self._on_training,
        }.get(method)
        if method == Method.SUBSCRIBE.value:
            await self._on_subscribe(ws, state, send_lock, rid, params)
            return
        if handler is None:
            await self._reply_error(ws, send_lock, rid, -32601, f"unknown method {method}")
            return
        await handler(ws, state, send_lock, rid, params)

    @staticmethod
    def _parse_request(
        frame: bytes | str,
    ) -> tuple[int, str, dict[str, Any]] | None:
        # requests decode as UnknownShape in the client-side codec, so peek
        # at the document directly
        try:
            text = frame.decode("utf-8") if isinstance(frame, bytes) else frame
            doc = json.loads(text)
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None
        if (
            not isinstance(doc, dict)
            or not isinstance(doc.get("id"), int)
            or not isinstance(doc.get("method"), str)
        ):
            return None
        params = doc.get("params")
        return doc["id"], doc["method"], params if isinstance(params, dict) else {}

    async def _reply(
        self, ws: ServerConnection, lock: asyncio.Lock, rid: int, result: Any
    ) -> None:
        async with lock:
            await ws.send(encode_response(RpcResponse(id=rid, result=result)))

    async def _reply_error(
        self,
        ws: ServerConnection,
        lock: asyncio.Lock,
        rid: int,
        code: int,
        message: str,
    ) -> None:
        async with lock:
            await ws.send(
                encode_response(RpcResponse(id=rid, error=RpcError(code, message)))
            )

    async def _on_authorize(self, ws, state, lock, rid, params) -> None:
        state.token = "sim-" + secrets.token_hex(8)
        await self._reply(ws, lock, rid, {"cortexToken": state.token})

    async def _on_query_headsets(self, ws, state, lock, rid, params) -> None:
        await self._reply(
            ws, lock, rid, [{"id": "SIM-0001", "status": "connected"}]
        )

    async def _on_query_profile(self, ws, state, lock, rid, params) -> None:
        await self._reply(ws, lock, rid, [{"name": "sim-profile"}])

    async def _on_setup_profile(self, ws, state, lock, rid, params) -> None:
        await self._reply(
            ws,
            lock,
            rid,
            {"profile": params.get("profile", ""), "action": params.get("status", "")},
        )

    async def _on_create_session(self, ws, state, lock, rid, params) -> None:
        state.session_id = "s-1"
        await self._reply(ws, lock, rid, {"id": state.session_id})

    async def _on_training(self, ws, state, lock, rid, params) -> None:
        delay = 0.0 if self.accelerated else self.training_delay_seconds
        if delay > 0:
            await asyncio.sleep(delay)
        await self._reply(
            ws,
            lock,
            rid,
            {
                "profile": params.get("profile", ""),
                "action": params.get("action", ""),
                "status": params.get("status", ""),
            },
        )

    async def _on_subscribe(self, ws, state, lock, rid, params) -> None:
        if state.session_id is None or params.get("session") != state.session_id:
            await self._reply_error(ws, lock, rid, -32002, "no such session")
            return
        if state.streaming:
            await self._reply_error(ws, lock, rid, -32003, "already subscribed")
            return
        streams = params.get("streams")
        if streams != [COM_STREAM]:
            await self._reply_error(ws, lock, rid, -32004, f"unsupported streams {streams}")
            return
        state.streaming = True
        await self._reply(
            ws, lock, rid, {"sid": state.session_id, "streams": [COM_STREAM]}
        )
        # stream in the background so further requests stay serviceable
        state.stream_task = asyncio.create_task(
            self._stream_then_close(ws, state, lock)
        )

    async def _stream_then_close(
        self, ws: ServerConnection, state: _ClientState, lock: asyncio.Lock
    ) -> None:
        try:
            await self._stream(ws, state, lock)
        except websockets.ConnectionClosed:
            return
        await ws.close(1000, SESSION_CLOSED_REASON)

    async def _stream(
        self, ws: ServerConnection, state: _ClientState, lock: asyncio.Lock
    ) -> None:
        loop = asyncio.get_running_loop()
        epoch = loop.time()
        for sample in self._samples:
            if not self.accelerated:
                # drift-corrected pacing against the epoch, never cumulative
                delay = epoch + sample.time - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
            action = (
                NEUTRAL_ACTION
                if sample.label.kind is LabelKind.NEUTRAL
                else sample.label.task_name
            )
            event = StreamEvent(
                sid=state.session_id or "s-1",
                time=sample.time,
                action=action or NEUTRAL_ACTION,
                power=sample.power,
            )
            async with lock:
                await ws.send(encode_event(event))


async def run_mock_server(
    scenario: Scenario,
    host: str = "127.0.0.1",
    port: int = 0,
    accelerated: bool = False,
    training_delay_seconds: float = DEFAULT_TRAINING_DELAY_SECONDS,
    ready: asyncio.Event | None = None,
    announce=None,
) -> None:
    """Run until cancelled. `announce(url)` is called once listening."""
    server = MockCortexServer(
        scenario,
        host=host,
        port=port,
        accelerated=accelerated,
        training_delay_seconds=training_delay_seconds,
    )
    await server.start()
    if announce is not None:
        announce(server.url)
    if ready is not None:
        ready.set()
    try:
        await asyncio.Event().wait()
    finally:
        await server.stop()
