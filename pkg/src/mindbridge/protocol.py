"""JSON-RPC-over-WebSocket message codec and client handshake state machine.

One JSON document per text frame. Outbound requests use the fixed key order
{"jsonrpc", "id", "method", "params"}; inbound frames are either RPC
responses (key "id") or classification stream events (keys "sid" + "com").
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

JSONRPC_VERSION = "2.0"
COM_STREAM = "com"
NEUTRAL_ACTION = "neutral"
DEFAULT_PORT = 6868


class ProtocolError(Exception):
    """Base for every protocol-level failure."""


class MalformedFrame(ProtocolError):
    """Frame is not valid UTF-8 JSON."""


class UnknownShape(ProtocolError):
    """Frame is valid JSON but is neither an RPC response nor a stream event."""


class OutOfRange(ProtocolError):
    """Stream event carries a power value outside [0, 1]."""


class ProtocolViolation(ProtocolError):
    """Peer response breaks the handshake contract (bad id, error response,
    unusable result). The message is suitable for operator display."""


class Method(str, Enum):
    AUTHORIZE = "authorize"
    QUERY_HEADSETS = "queryHeadsets"
    CREATE_SESSION = "createSession"
    SUBSCRIBE = "subscribe"
    QUERY_PROFILE = "queryProfile"
    SETUP_PROFILE = "setupProfile"
    TRAINING = "training"


@dataclass(frozen=True)
class RpcRequest:
    id: int
    method: Method
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.id, int) or isinstance(self.id, bool) or self.id < 1:
            raise ValueError(f"request id must be a positive integer, got {self.id!r}")
        if not isinstance(self.method, Method):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class RpcError:
    code: int
    message: str


@dataclass(frozen=True)
class RpcResponse:
    id: int
    result: Any = None
    error: RpcError | None = None

    def __post_init__(self) -> None:
        if (self.result is None) == (self.error is None):
            raise ValueError("exactly one of result/error must be present")

    @property
    def is_error(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class StreamEvent:
    """One classifier output: detected action name plus its power in [0, 1]."""

    sid: str
    time: float
    action: str
    power: float


class ConnectedSignal:
    """Transport-level 'connection established' marker fed to the handshake."""

    def __repr__(self) -> str:  # pragma: no cover
        return "ConnectedSignal()"


def encode_request(req: RpcRequest) -> bytes:
    """Serialize a request to one UTF-8 JSON frame with canonical key order."""
    doc = {
        "jsonrpc": JSONRPC_VERSION,
        "id": req.id,
        "method": req.method.value,
        "params": req.params,
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def encode_response(resp: RpcResponse) -> bytes:
    doc: dict[str, Any] = {"jsonrpc": JSONRPC_VERSION, "id": resp.id}
    if resp.error is not None:
        doc["error"] = {"code": resp.error.code, "message": resp.error.message}
    else:
        doc["result"] = resp.result
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def encode_event(event: StreamEvent) -> bytes:
    doc = {"sid": event.sid, "time": event.time, "com": [event.action, event.power]}
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def _is_real(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _decode_event(doc: dict[str, Any]) -> StreamEvent:
    sid = doc.get("sid")
    com = doc.get("com")
    time = doc.get("time")
    if not isinstance(sid, str) or not _is_real(time):
        raise UnknownShape("stream event needs a text sid and numeric time")
    if not isinstance(com, (list, tuple)) or len(com) != 2:
        raise UnknownShape("com must be a [action, power] pair")
    action, power = com
    if not isinstance(action, str) or not _is_real(power):
        raise UnknownShape("com pair must be [text action, numeric power]")
    if not 0.0 <= float(power) <= 1.0:
        raise OutOfRange(f"power {power} outside [0, 1]")
    return StreamEvent(sid=sid, time=float(time), action=action, power=float(power))


def _decode_response(doc: dict[str, Any]) -> RpcResponse:
    rid = doc.get("id")
    if not isinstance(rid, int) or isinstance(rid, bool):
        raise UnknownShape("response id must be an integer")
    has_result = "result" in doc
    has_error = "error" in doc
    if has_result == has_error:
        raise UnknownShape("response must carry exactly one of result/error")
    if has_error:
        err = doc["error"]
        if (
            not isinstance(err, dict)
            or not isinstance(err.get("code"), int)
            or isinstance(err.get("code"), bool)
            or not isinstance(err.get("message"), str)
        ):
            raise UnknownShape("error must be {code: integer, message: text}")
        return RpcResponse(id=rid, error=RpcError(err["code"], err["message"]))
    result = doc["result"]
    if result is None:
        raise UnknownShape("null result is not a value")
    return RpcResponse(id=rid, result=result)


def decode_message(frame: bytes | str) -> RpcResponse | StreamEvent:
    """Classify and decode one complete text frame.

    Raises MalformedFrame for non-JSON input, UnknownShape when the document
    is neither message kind (or is ambiguous), OutOfRange for a bad power.
    """
    if isinstance(frame, bytes):
        try:
            text = frame.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame(f"frame is not UTF-8: {exc}") from exc
    else:
        text = frame
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise MalformedFrame(f"frame is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UnknownShape(f"top level must be an object, got {type(doc).__name__}")

    looks_event = "sid" in doc and "com" in doc
    looks_response = "id" in doc
    if looks_event and looks_response:
        raise UnknownShape("frame carries both stream and response keys")
    if looks_event:
        return _decode_event(doc)
    if looks_response:
        return _decode_response(doc)
    raise UnknownShape(f"unrecognized frame keys {sorted(doc)}")


class HandshakePhase(Enum):
    DISCONNECTED = "Disconnected"
    CONNECTED = "Connected"
    AUTHORIZED = "Authorized"
    HEADSET_KNOWN = "HeadsetKnown"
    SESSION_OPEN = "SessionOpen"
    SUBSCRIBED = "Subscribed"


# Clean-path request order; the phase advances as each request goes out.
_HANDSHAKE_ORDER = (
    Method.AUTHORIZE,
    Method.QUERY_HEADSETS,
    Method.SETUP_PROFILE,
    Method.CREATE_SESSION,
    Method.SUBSCRIBE,
)


class HandshakeMachine:
    """Drives one connection from Disconnected to a live "com" subscription.

    Clean path sends exactly five requests: authorize, queryHeadsets,
    setupProfile (profile load), createSession, subscribe. Any error response
    or id mismatch drops the machine back to Disconnected and raises
    ProtocolViolation with an operator-readable message.
    """

    def __init__(self, profile: str) -> None:
        self.profile = profile
        self.phase = HandshakePhase.DISCONNECTED
        self.token: str | None = None
        self.headset: str | None = None
        self.session_id: str | None = None
        self.complete = False
        self._next_id = 1
        self._pending: RpcRequest | None = None

    def advance(
        self, inbound: RpcResponse | ConnectedSignal
    ) -> RpcRequest | None:
        """Consume one inbound message, return the next request to send.

        Returns None once subscribed (nothing left to send). Total over all
        (phase, inbound) pairs: unexpected input raises ProtocolViolation,
        never anything else.
        """
        if isinstance(inbound, ConnectedSignal):
            if self.phase is not HandshakePhase.DISCONNECTED:
                return self._violation("transport reconnected mid-handshake")
            self.phase = HandshakePhase.CONNECTED
            return self._send(Method.AUTHORIZE, {})
        if not isinstance(inbound, RpcResponse):
            return self._violation(
                f"unexpected {type(inbound).__name__} frame during handshake"
            )
        if self.phase is HandshakePhase.DISCONNECTED:
            return self._violation("response received while disconnected")
        if self._pending is None or inbound.id != self._pending.id:
            want = self._pending.id if self._pending else None
            return self._violation(
                f"response id {inbound.id} does not match outstanding request {want}"
            )
        if inbound.is_error:
            assert inbound.error is not None
            return self._violation(
                f"{self._pending.method.value} failed: "
                f"{inbound.error.message} (code {inbound.error.code})"
            )
        return self._on_result(self._pending.method, inbound.result)

    def _on_result(self, method: Method, result: Any) -> RpcRequest | None:
        if method is Method.AUTHORIZE:
            if isinstance(result, dict) and isinstance(result.get("cortexToken"), str):
                self.token = result["cortexToken"]
            else:
                return self._violation("authorize result carries no cortexToken")
            self.phase = HandshakePhase.AUTHORIZED
            return self._send(Method.QUERY_HEADSETS, {})
        if method is Method.QUERY_HEADSETS:
            headset = self._pick_headset(result)
            if headset is None:
                return self._violation("no headset available")
            self.headset = headset
            self.phase = HandshakePhase.HEADSET_KNOWN
            return self._send(
                Method.SETUP_PROFILE, {"profile": self.profile, "status": "load"}
            )
        if method is Method.SETUP_PROFILE:
            self.phase = HandshakePhase.SESSION_OPEN
            return self._send(
                Method.CREATE_SESSION, {"headset": self.headset, "status": "open"}
            )
        if method is Method.CREATE_SESSION:
            if isinstance(result, dict) and isinstance(result.get("id"), str):
                self.session_id = result["id"]
            else:
                return self._violation("createSession result carries no session id")
            self.phase = HandshakePhase.SUBSCRIBED
            return self._send(
                Method.SUBSCRIBE,
                {"session": self.session_id, "streams": [COM_STREAM]},
            )
        if method is Method.SUBSCRIBE:
            self.complete = True
            self._pending = None
            return None
        return self._violation(f"unexpected result for {method.value}")

    @staticmethod
    def _pick_headset(result: Any) -> str | None:
        if not isinstance(result, list):
            return None
        for entry in result:
            if isinstance(entry, dict) and isinstance(entry.get("id"), str):
                return entry["id"]
        return None

    def _send(self, method: Method, params: dict[str, Any]) -> RpcRequest:
        req = RpcRequest(id=self._next_id, method=method, params=params)
        self._next_id += 1
        self._pending = req
        return req

    def _violation(self, message: str) -> None:
        self.phase = HandshakePhase.DISCONNECTED
        self._pending = None
        raise ProtocolViolation(message)
