"""HTTP control plane and status WebSocket for the bridge daemon.

Routes mirror the operator workflow: manage profiles, train, pick an
activity, start/stop the session, tune the threshold, watch /events.
Errors come back as {"error": <kind>, "message": <text>} with a status
code per kind.
"""

from __future__ import annotations

import json
from typing import Any, Awaitable, Callable

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from mindbridge import __version__
from mindbridge.daemon.profiles import (
    DuplicateName,
    ProfileNotFound,
    ProfileRecord,
    StoreIO,
)
from mindbridge.daemon.session import (
    AlreadyRunning,
    BridgeDaemon,
    HandshakeFailed,
    NotRunning,
    ProfileUntrained,
    SessionAborted,
    SessionFaulted,
    ThresholdOutOfRange,
    TrainingRejected,
    UnknownActivity,
)
from mindbridge.engine import CommandBinding

_ERROR_STATUS: dict[type[Exception], int] = {
    ProfileNotFound: 404,
    DuplicateName: 409,
    ProfileUntrained: 409,
    AlreadyRunning: 409,
    NotRunning: 409,
    SessionAborted: 409,
    ThresholdOutOfRange: 400,
    UnknownActivity: 400,
    ValueError: 400,
    HandshakeFailed: 502,
    TrainingRejected: 502,
    SessionFaulted: 502,
    StoreIO: 500,
}


def _handler_for(status: int) -> Callable[[Request, Exception], Awaitable[Any]]:
    async def handler(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    return handler


class BindingBody(BaseModel):
    activity: str
    onKey: str


class ProfileBody(BaseModel):
    taskName: str
    binding: BindingBody
    defaultThreshold: int = 5
    trained: bool = False
    overwrite: bool = False


class SessionBody(BaseModel):
    profile: str
    activity: str | None = None
    threshold: int | None = None


class ThresholdBody(BaseModel):
    threshold: int


def build_app(daemon: BridgeDaemon, console_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="bridge control", version=__version__)
    for exc_type, status in _ERROR_STATUS.items():
        app.add_exception_handler(exc_type, _handler_for(status))

    @app.get("/profiles")
    async def get_profiles() -> list[dict[str, Any]]:
        return [record.to_dict() for record in daemon.store.list()]

    @app.put("/profiles/{name}")
    async def put_profile(name: str, body: ProfileBody) -> dict[str, Any]:
        record = ProfileRecord(
            name=name,
            task_name=body.taskName,
            binding=CommandBinding(
                activity=body.binding.activity, on_key=body.binding.onKey
            ),
            default_threshold=body.defaultThreshold,
            trained=body.trained,
        )
        if body.overwrite:
            daemon.store.upsert(record)
        else:
            daemon.store.create(record)
        return record.to_dict()

    @app.post("/profiles/{name}/train")
    async def train_profile(name: str) -> dict[str, Any]:
        record = await daemon.train_action(name)
        return record.to_dict()

    @app.get("/activities")
    async def get_activities() -> list[dict[str, str]]:
        return daemon.activities()

    @app.get("/session")
    async def get_session() -> dict[str, Any]:
        return daemon.snapshot()

    @app.post("/session")
    async def post_session(body: SessionBody) -> dict[str, Any]:
        return await daemon.start_session(
            body.profile, activity=body.activity, threshold=body.threshold
        )

    @app.delete("/session")
    async def delete_session() -> dict[str, Any]:
        final = await daemon.stop_session()
        return final.to_dict()

    @app.patch("/session")
    async def patch_session(body: ThresholdBody) -> dict[str, Any]:
        await daemon.set_threshold(body.threshold)
        return daemon.snapshot()

    @app.websocket("/events")
    async def events(ws: WebSocket) -> None:
        await ws.accept()
        sub = daemon.bus.subscribe()
        try:
            while True:
                event = await sub.get()
                await ws.send_text(
                    json.dumps(event.to_dict(), separators=(",", ":"))
                )
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            sub.close()

    if console_dir is not None:
        # mounted last so the API routes above take precedence
        app.mount(
            "/", StaticFiles(directory=console_dir, html=True), name="console"
        )
    else:

        @app.get("/")
        async def root() -> dict[str, str]:
            return {"service": "bridge control", "version": __version__}

    return app
