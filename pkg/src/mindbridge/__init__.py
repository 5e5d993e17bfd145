"""Bridge between a mental-command classification stream and keystroke output."""

__version__ = "0.1.0"
