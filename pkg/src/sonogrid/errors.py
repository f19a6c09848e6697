"""Shared exception types."""


class ValidationError(ValueError):
    """Input violates a documented invariant (bad block, path, payload...)."""


class AuthError(Exception):
    """Request carried a missing or wrong bearer token."""


class JournalCorruptError(Exception):
    """A non-trailing journal record failed its integrity check."""


class StreamOverflow(Exception):
    """Subscriber fell behind the bounded event buffer; resubscribe required."""


class TransportError(Exception):
    """Network or non-auth HTTP failure; retryable."""
