"""Exception types shared across the toolkit."""
from __future__ import annotations


class GlyphforgeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(GlyphforgeError):
    """Bad input data or parameters. Carries a machine-readable reason code."""

    def __init__(self, reason: str, message: str | None = None):
        self.reason = reason
        self.message = message or reason
        super().__init__(self.message)


class BackendError(GlyphforgeError):
    """Model backend/transport failure.

    `retriable` distinguishes transient faults (timeouts, 5xx) from
    permanent ones (auth, attachment rejected).
    """

    def __init__(self, reason: str, message: str | None = None, retriable: bool = False):
        self.reason = reason
        self.message = message or reason
        self.retriable = retriable
        super().__init__(self.message)
