"""
Stochastic gradient descent with momentum and weight decay.
"""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np
from loguru import logger

from modedg.autodiff.tensor import GradientMap, Tensor
from modedg.utils.errors import ShapeError


@dataclass
class SGDState:
    """Momentum buffers keyed by parameter name."""
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0


def sgd_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    lr: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
    state: Optional[SGDState] = None
) -> SGDState:
    """
    Apply one SGD update in place.

    The weight-decay term is folded into the momentum buffer:
    ``v <- momentum * v + g + weight_decay * w`` then ``w <- w - lr * v``.
    The first step initializes ``v`` to ``g + weight_decay * w``.

    Args:
        params: Named parameter tensors, updated in place
        grads: Gradient array for each parameter name
        lr: Learning rate
        momentum: Momentum coefficient
        weight_decay: L2 penalty coefficient
        state: Momentum state from the previous step

    Returns:
        The updated state (the same object when one was given)

    Raises:
        ShapeError: If a gradient does not match its parameter
    """
    state = state if state is not None else SGDState()
    # Sorted names fix the update order regardless of dict construction
    for name in sorted(params):
        param = params[name]
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != param.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, expected {param.shape}")
        direction = grad + weight_decay * param.data if weight_decay else grad
        previous = state.velocity.get(name)
        if momentum and previous is not None:
            velocity = momentum * previous + direction
        else:
            velocity = direction
        state.velocity[name] = velocity
        # Rebind rather than mutate so earlier snapshots stay valid
        param.data = param.data - lr * velocity
    state.steps += 1
    return state


class SGD:
    """Stateful optimizer over a fixed set of named parameters."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float,
        momentum: float = 0.0,
        weight_decay: float = 0.0
    ):
        self.params = dict(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.state = SGDState()

    def set_lr(self, lr: float) -> None:
        if lr != self.lr:
            logger.debug(f"Learning rate {self.lr:g} -> {lr:g}")
        self.lr = lr

    def step(self, grads: GradientMap) -> None:
        """Update every parameter from a gradient map over the parameter tensors."""
        named = {name: grads[param] for name, param in self.params.items()}
        sgd_step(self.params, named, self.lr, self.momentum, self.weight_decay, self.state)
