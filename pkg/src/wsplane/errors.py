"""Error types shared across the control plane.

Every rejection carries a machine-readable code, a human message and,
when it makes sense, the offending field. The HTTP layer maps these
codes onto status codes; the CLI prints them on stderr.
"""

from __future__ import annotations


class PlaneError(Exception):
    """Base class for all command rejections."""

    def __init__(self, code: str, message: str, field: str | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.field = field

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "field": self.field}


class NotFoundError(PlaneError):
    """Lookup against an unknown identifier."""


class ConflictError(PlaneError):
    """Operation conflicts with existing state (duplicates, busy mode changes)."""


class ValidationError(PlaneError):
    """Malformed or out-of-range input."""


class TransitionError(PlaneError):
    """Illegal workspace lifecycle transition."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__("invalid_transition", message, field)


class AuthorizationError(PlaneError):
    def __init__(self, message: str):
        super().__init__("not_authorized", message)
