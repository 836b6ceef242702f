"""
Reverse-mode automatic differentiation over float64 numpy arrays.
"""

from .tensor import Tensor, Graph, GradientMap, backward, grad
from . import ops
from .ops import (
    as_tensor,
    concat,
    conv2d,
    dense,
    flatten,
    maxpool2d,
    relu,
    softmax_cross_entropy,
    weighted_sum,
)
from .optim import SGD, SGDState, sgd_step

__all__ = [
    # Engine
    "Tensor",
    "Graph",
    "GradientMap",
    "backward",
    "grad",

    # Operations
    "ops",
    "as_tensor",
    "concat",
    "conv2d",
    "dense",
    "flatten",
    "maxpool2d",
    "relu",
    "softmax_cross_entropy",
    "weighted_sum",

    # Optimization
    "SGD",
    "SGDState",
    "sgd_step",
]
