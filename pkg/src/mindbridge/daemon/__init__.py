"""Bridge daemon: profile store, session lifecycle, and the control API."""

from mindbridge.daemon.profiles import ProfileRecord, ProfileStore
from mindbridge.daemon.session import BridgeDaemon, SessionPhase, StatusEvent

__all__ = [
    "BridgeDaemon",
    "ProfileRecord",
    "ProfileStore",
    "SessionPhase",
    "StatusEvent",
]
