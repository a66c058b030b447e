"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "UniftestError",
    "StreamExhaustedError",
    "TestTerminatedError",
    "InfeasibleScheduleError",
]


class UniftestError(Exception):
    """Base class for package-specific errors."""


class StreamExhaustedError(UniftestError):
    """A sample stream ended before the test could reach a verdict.

    Carries the partial progress so callers can inspect how far the test got.
    """

    def __init__(self, message: str, *, samples_seen: int, epoch: int):
        super().__init__(message)
        self.samples_seen = samples_seen
        self.epoch = epoch


class TestTerminatedError(UniftestError):
    """A sample was fed to a test that has already produced a verdict."""


class InfeasibleScheduleError(UniftestError):
    """The requested schedule is too large to execute on this machine."""
