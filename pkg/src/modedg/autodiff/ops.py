"""
Differentiable operations over :class:`~modedg.autodiff.tensor.Tensor`.

Every op computes its output with numpy and attaches a backward closure that
maps the output gradient to one gradient per parent. The closure receives a
``needs`` mask so work for parents off the differentiation path is skipped.
"""
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from modedg.autodiff.tensor import Tensor, TensorLike
from modedg.utils.errors import ShapeError


def as_tensor(value: TensorLike) -> Tensor:
    """Wrap non-tensor values as constant tensors."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


# Elementwise arithmetic

def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(g, needs):
        return (
            _unbroadcast(g, a.shape) if needs[0] else None,
            _unbroadcast(g, b.shape) if needs[1] else None,
        )
    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def backward(g, needs):
        return (
            _unbroadcast(g, a.shape) if needs[0] else None,
            _unbroadcast(-g, b.shape) if needs[1] else None,
        )
    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(g, needs):
        return (
            _unbroadcast(g * b.data, a.shape) if needs[0] else None,
            _unbroadcast(g * a.data, b.shape) if needs[1] else None,
        )
    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")

    def backward(g, needs):
        return (
            _unbroadcast(g / b.data, a.shape) if needs[0] else None,
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if needs[1] else None,
        )
    return Tensor.from_op(a.data / b.data, (a, b), backward, "div")


def neg(x: TensorLike) -> Tensor:
    x = as_tensor(x)
    return Tensor.from_op(-x.data, (x,), lambda g, needs: (-g,), "neg")


def sqrt(x: TensorLike) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)

    def backward(g, needs):
        return (g * 0.5 / out,)
    return Tensor.from_op(out, (x,), backward, "sqrt")


# Reductions and reshapes

def sum(x: TensorLike, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g, needs):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)
    return Tensor.from_op(out, (x,), backward, "sum")


def mean(x: TensorLike, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = range(x.ndim) if axis is None else np.atleast_1d(axis)
    count = int(np.prod([x.shape[a] for a in axes]))
    return div(sum(x, axis=axis, keepdims=keepdims), float(count))


def reshape(x: TensorLike, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)
    return Tensor.from_op(out, (x,), lambda g, needs: (g.reshape(x.shape),), "reshape")


def flatten(x: TensorLike) -> Tensor:
    """Collapse every axis after the first."""
    x = as_tensor(x)
    return reshape(x, (x.shape[0], -1))


def index(x: TensorLike, key) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate in backward."""
    x = as_tensor(x)
    out = x.data[key]

    def backward(g, needs):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return (full,)
    return Tensor.from_op(np.array(out, copy=True), (x,), backward, "index")


def concat(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g, needs):
        return tuple(np.split(g, bounds, axis=axis))
    return Tensor.from_op(out, parts, backward, "concat")


# Linear algebra

def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g, needs):
        return (
            g @ b.data.T if needs[0] else None,
            a.data.T @ g if needs[1] else None,
        )
    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def dense(x: TensorLike, w: TensorLike, b: TensorLike) -> Tensor:
    """
    Affine map ``y = x @ w + b``.

    Args:
        x: Input of shape (n, in)
        w: Weights of shape (in, out)
        b: Bias of shape (out,)

    Returns:
        Output of shape (n, out)
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense: input {x.shape} does not match weights {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"dense: bias {b.shape} does not match {w.shape[1]} outputs")

    def backward(g, needs):
        return (
            g @ w.data.T if needs[0] else None,
            x.data.T @ g if needs[1] else None,
            g.sum(axis=0) if needs[2] else None,
        )
    return Tensor.from_op(x.data @ w.data + b.data, (x, w, b), backward, "dense")


def weighted_sum(weights: TensorLike, values: TensorLike) -> Tensor:
    """
    Contract mixing weights against stacked values.

    Args:
        weights: Shape (..., m)
        values: Shape (..., m, c)

    Returns:
        Tensor of shape (..., c) holding ``sum_m weights[..., m] * values[..., m, :]``
    """
    weights, values = as_tensor(weights), as_tensor(values)
    if values.ndim < 2 or weights.shape != values.shape[:-1]:
        raise ShapeError(f"weighted_sum: weights {weights.shape} vs values {values.shape}")
    out = np.einsum("...m,...mc->...c", weights.data, values.data)

    def backward(g, needs):
        return (
            np.einsum("...c,...mc->...m", g, values.data) if needs[0] else None,
            np.einsum("...m,...c->...mc", weights.data, g) if needs[1] else None,
        )
    return Tensor.from_op(out, (weights, values), backward, "weighted_sum")


# Convolutional building blocks

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> Tuple[np.ndarray, int, int]:
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    return cols, ho, wo


def conv2d(
    x: TensorLike,
    k: TensorLike,
    bias: Optional[TensorLike] = None,
    stride: int = 1,
    pad: int = 0
) -> Tensor:
    """
    2D cross-correlation.

    Args:
        x: Input of shape (n, c, h, w)
        k: Kernel of shape (co, c, kh, kw)
        bias: Optional bias of shape (co,)
        stride: Step between windows
        pad: Zero padding added on every spatial side

    Returns:
        Output of shape (n, co, ho, wo)

    Raises:
        ShapeError: On channel mismatch or a kernel larger than the padded input
    """
    x, k = as_tensor(x), as_tensor(k)
    if x.ndim != 4 or k.ndim != 4:
        raise ShapeError(f"conv2d expects 4D input and kernel, got {x.shape} and {k.shape}")
    n, c, h, w = x.shape
    co, ck, kh, kw = k.shape
    if ck != c:
        raise ShapeError(f"conv2d: input has {c} channels, kernel expects {ck}")
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w + 2 * pad}")
    if stride < 1:
        raise ShapeError(f"conv2d: stride must be positive, got {stride}")

    cols, ho, wo = _im2col(x.data, kh, kw, stride, pad)
    kmat = k.data.reshape(co, -1)
    out = (cols @ kmat.T).reshape(n, ho, wo, co).transpose(0, 3, 1, 2)
    parents: Tuple[Tensor, ...] = (x, k)
    if bias is not None:
        b = as_tensor(bias)
        if b.shape != (co,):
            raise ShapeError(f"conv2d: bias {b.shape} does not match {co} output channels")
        out = out + b.data[None, :, None, None]
        parents = (x, k, b)
    out = np.ascontiguousarray(out)

    def backward(g, needs):
        gm = g.transpose(0, 2, 3, 1).reshape(-1, co)
        dx = dk = db = None
        if needs[0]:
            dcols = (gm @ kmat).reshape(n, ho, wo, c, kh, kw)
            dpad = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
            for i in range(kh):
                for j in range(kw):
                    dpad[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            dx = dpad[:, :, pad:pad + h, pad:pad + w]
        if needs[1]:
            dk = (gm.T @ cols).reshape(k.shape)
        if len(needs) > 2 and needs[2]:
            db = g.sum(axis=(0, 2, 3))
        return (dx, dk, db)[:len(parents)]
    return Tensor.from_op(out, parents, backward, "conv2d")


def relu(x: TensorLike) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor.from_op(np.where(mask, x.data, 0.0), (x,), lambda g, needs: (g * mask,), "relu")


def maxpool2d(x: TensorLike, size: int = 2, stride: Optional[int] = None) -> Tensor:
    """Windowed max over (size x size) windows; backward routes to the argmax."""
    x = as_tensor(x)
    stride = stride or size
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d expects a 4D input, got {x.shape}")
    n, c, h, w = x.shape
    if size > h or size > w:
        raise ShapeError(f"maxpool2d: window {size} larger than input {h}x{w}")

    windows = sliding_window_view(x.data, (size, size), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    flat = windows.reshape(n, c, ho, wo, size * size)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    di, dj = np.divmod(arg, size)
    rows = np.arange(ho)[None, None, :, None] * stride + di
    cols = np.arange(wo)[None, None, None, :] * stride + dj
    ni = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]

    def backward(g, needs):
        dx = np.zeros_like(x.data)
        np.add.at(dx, (ni, ci, rows, cols), g)
        return (dx,)
    return Tensor.from_op(out, (x,), backward, "maxpool2d")


# Losses

def softmax_cross_entropy(
    logits: TensorLike,
    labels: Sequence[int],
    reduction: str = "mean"
) -> Tensor:
    """
    Cross entropy of softmax probabilities against integer labels.

    Args:
        logits: Scores of shape (n, K)
        labels: Class indices in [0, K)
        reduction: "mean", "sum" or "none" (per-sample losses)

    Returns:
        Scalar loss, or shape (n,) for ``reduction="none"``
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"softmax_cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    n, num_classes = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    if reduction not in ("mean", "sum", "none"):
        raise ValueError(f"Unknown reduction: {reduction}")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(n)
    losses = -log_probs[rows, labels]

    if reduction == "none":
        out = losses
    elif reduction == "sum":
        out = np.array(losses.sum())
    else:
        out = np.array(losses.mean())

    def backward(g, needs):
        d = np.exp(log_probs)
        d[rows, labels] -= 1.0
        if reduction == "none":
            return (d * g[:, None],)
        if reduction == "mean":
            return (d * (g / n),)
        return (d * g,)
    return Tensor.from_op(out, (logits,), backward, "softmax_cross_entropy")
