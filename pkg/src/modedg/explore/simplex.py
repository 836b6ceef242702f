"""
Mixing weights on the probability simplex and their sign-gradient update.
"""
from dataclasses import dataclass
from typing import List

import numpy as np
from loguru import logger

from modedg.utils.errors import ConfigurationError, ShapeError
from modedg.utils.validation import simplex_weights

# Below this clamped mass the update falls back to uniform weights
DEGENERATE_SUM = 1e-12


@dataclass(frozen=True, eq=False)
class Alpha:
    """Weights ``[alpha_0, ..., alpha_M]`` over the explored sample and its M providers."""
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", simplex_weights(np.array(self.weights, dtype=np.float64)))
        if self.weights.ndim != 1:
            raise ShapeError(f"Alpha expects a vector, got shape {self.weights.shape}")
        self.weights.setflags(write=False)

    @classmethod
    def uniform(cls, M: int) -> "Alpha":
        return cls(np.full(M + 1, 1.0 / (M + 1)))

    @classmethod
    def basis(cls, M: int, index: int = 0) -> "Alpha":
        """All weight on one slot; ``basis(M, 0)`` keeps the sample's own style."""
        weights = np.zeros(M + 1)
        weights[index] = 1.0
        return cls(weights)

    @property
    def M(self) -> int:
        return len(self.weights) - 1

    def to_list(self) -> List[float]:
        return [float(w) for w in self.weights]

    def __len__(self) -> int:
        return len(self.weights)


def init_alpha(M: int) -> Alpha:
    """
    Uniform starting weights.

    Raises:
        ConfigurationError: If M < 1
    """
    if M < 1:
        raise ConfigurationError(f"at least one style provider is required, got M={M}")
    return Alpha.uniform(M)


def init_alpha_batch(n: int, M: int) -> np.ndarray:
    """Uniform starting weights for ``n`` samples, shape ``[n, M + 1]``."""
    init_alpha(M)
    return np.full((n, M + 1), 1.0 / (M + 1))


def alpha_update_batch(weights: np.ndarray, grads: np.ndarray, mu: float) -> np.ndarray:
    """
    One ascent step per row: ``alpha + mu * sign(grad)``, clamped and renormalized.

    Rows whose step is zero (``mu = 0`` or an all-zero gradient sign) are
    returned unchanged. Rows whose clamped mass is below ``DEGENERATE_SUM``
    fall back to uniform weights.

    Args:
        weights: Current weights ``[n, M + 1]``
        grads: Loss gradients with respect to the weights, same shape
        mu: Step size

    Returns:
        Updated weights ``[n, M + 1]``
    """
    weights = np.asarray(weights, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if weights.shape != grads.shape:
        raise ShapeError(f"weights {weights.shape} and gradient {grads.shape} differ")
    updated = weights.copy()
    steps = mu * np.sign(grads)
    moving = np.any(steps != 0, axis=-1)
    if not np.any(moving):
        return updated

    stepped = np.clip(weights[moving] + steps[moving], 0.0, None)
    totals = stepped.sum(axis=-1, keepdims=True)
    degenerate = totals[:, 0] < DEGENERATE_SUM
    if np.any(degenerate):
        logger.warning(f"{int(degenerate.sum())} weight vectors collapsed; resetting to uniform")
        stepped[degenerate] = 1.0
        totals[degenerate] = stepped.shape[-1]
    updated[moving] = stepped / totals
    return updated


def alpha_update(alpha: Alpha, grad: np.ndarray, mu: float) -> Alpha:
    """Single-sample form of :func:`alpha_update_batch`."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != alpha.weights.shape:
        raise ShapeError(f"gradient shape {grad.shape} does not match weights {alpha.weights.shape}")
    return Alpha(alpha_update_batch(alpha.weights[None], grad[None], mu)[0])
