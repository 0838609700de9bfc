"""Error types shared by all modules.

Every error carries the parameter set that triggered it so that the CLI can
report failures in a structured way.
"""
from __future__ import annotations


class DistillationError(ValueError):
    """Base class for all package errors."""

    kind = "error"

    def __init__(self, message: str, **params):
        super().__init__(message)
        self.params = params

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self), "params": _plain(self.params)}


class InvalidDimensionError(DistillationError):
    kind = "invalid-dimension"


class KindMismatchError(DistillationError):
    kind = "kind-mismatch"


class InvalidStateError(DistillationError):
    kind = "invalid-state"


class ZeroStateError(DistillationError):
    """Raised when a conditional state has (numerically) vanishing norm."""

    kind = "zero-state"

    def __init__(self, message: str, probability: float = 0.0, **params):
        super().__init__(message, probability=probability, **params)
        self.probability = probability


class TruncationError(DistillationError):
    """Raised when the requested operation does not fit the Fock cutoff."""

    kind = "truncation-error"

    def __init__(self, message: str, suggested_dim: int | None = None, **params):
        super().__init__(message, suggested_dim=suggested_dim, **params)
        self.suggested_dim = suggested_dim


class DegenerateStateError(DistillationError):
    kind = "degenerate-state"


class InvalidParameterError(DistillationError):
    kind = "invalid-parameter"


class UnreachableTargetError(DistillationError):
    kind = "unreachable-target"


class NoSqueezingExtractableError(DistillationError):
    kind = "no-squeezing-extractable"


def _plain(obj):
    # make parameters JSON friendly
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    try:
        return float(obj)
    except (TypeError, ValueError):
        return repr(obj)


class TruncationWarning(UserWarning):
    """Issued when a quantity is computed from a state that is not truncation-clean."""
