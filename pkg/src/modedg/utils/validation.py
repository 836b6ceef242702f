"""
Argument checks shared by the generators and the exploration loop.
"""
import numpy as np

from .errors import ConfigurationError, SimplexError

SIMPLEX_TOLERANCE = 1e-9


def simplex_weights(weights, tol: float = SIMPLEX_TOLERANCE) -> np.ndarray:
    """
    Return mixing weights as a float64 array after checking they lie on the simplex.

    Accepts an ``Alpha``, a tensor, or any array whose last axis holds the
    weights; every row along that axis is checked.

    Raises:
        SimplexError: If an entry is negative or a row does not sum to 1
    """
    values = getattr(weights, "weights", weights)
    values = np.asarray(getattr(values, "data", values), dtype=np.float64)
    if values.ndim == 0 or values.shape[-1] < 2:
        raise SimplexError(f"mixing weights need at least 2 entries, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise SimplexError("mixing weights contain non-finite entries")
    if np.any(values < -tol):
        raise SimplexError(f"mixing weights contain negative entries (min {values.min():.3g})")
    drift = np.abs(values.sum(axis=-1) - 1.0)
    if np.any(drift > tol):
        raise SimplexError(f"mixing weights sum off 1 by {drift.max():.3g}")
    return values


def check_gamma(gamma: float) -> float:
    """Mixing strength must lie in [0, 1]."""
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ConfigurationError(f"gamma must be in [0, 1], got {gamma}")
    return gamma
