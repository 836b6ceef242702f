"""
Exception hierarchy for modedg.

Every error derives from :class:`ModeError` and from the builtin exception a
caller would naturally expect, so ``except ValueError`` keeps working.
"""
from typing import Any, Dict, Optional


class ModeError(Exception):
    """Base class for all modedg errors."""


class ShapeError(ModeError, ValueError):
    """Operand shapes do not agree."""


class SizeError(ModeError, ValueError):
    """An extent is unsupported (non power of two, too few elements)."""


class SimplexError(ModeError, ValueError):
    """Mixing weights are not on the probability simplex."""


class AmplitudeError(ModeError, ValueError):
    """An amplitude plane contains negative entries."""


class GraphError(ModeError, ValueError):
    """Invalid request against a computation graph."""


class ConfigurationError(ModeError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DatasetFormatError(ModeError, ValueError):
    """A stored tensor container or manifest is malformed."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{message} (field: {field})"
        super().__init__(message)


class DivergenceError(ModeError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} [{details}]"
        super().__init__(message)
