"""
Dense tensors and the reverse-mode differentiation engine.

A :class:`Tensor` wraps a float64 numpy array. Differentiable operations (see
:mod:`modedg.autodiff.ops`) return tensors that remember their parents and a
backward function, but only when at least one parent requires a gradient.
:class:`Graph` orders the recorded nodes topologically and :func:`backward`
walks that order in reverse.

Gradients are never stored on the tensors themselves: :func:`backward` keeps
them in a local dict and returns a :class:`GradientMap`. Several graphs built
over the same read-only parameters can therefore be differentiated from
different threads.
"""
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from modedg.utils.errors import GraphError

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]

# backward(grad_out, needs) -> one gradient (or None) per parent
BackwardFn = Callable[[np.ndarray, Tuple[bool, ...]], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """N-dimensional float64 array that may take part in a computation graph."""

    __slots__ = ("data", "requires_grad", "op", "name", "_parents", "_backward")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None
    ):
        """
        Create a leaf tensor.

        Args:
            data: Array-like payload, converted to float64
            requires_grad: Whether gradients may be requested for this tensor
            name: Optional label used in error messages
        """
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.op = "leaf"
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Tuple["Tensor", ...],
        backward: BackwardFn,
        op: str
    ) -> "Tensor":
        """Build the output of a differentiable operation."""
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.name = None
        out.op = op
        out.requires_grad = any(p.requires_grad for p in parents)
        # Constant subgraphs are folded: no parents, nothing to differentiate
        out._parents = parents if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def parents(self) -> Tuple["Tensor", ...]:
        return self._parents

    def item(self) -> float:
        """Return the value of a single-element tensor as a float."""
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Return a constant tensor sharing this tensor's values."""
        return Tensor(self.data)

    # Arithmetic delegates to the op library
    def __add__(self, other: "TensorLike") -> "Tensor":
        return ops.add(self, other)

    def __radd__(self, other: "TensorLike") -> "Tensor":
        return ops.add(other, self)

    def __sub__(self, other: "TensorLike") -> "Tensor":
        return ops.sub(self, other)

    def __rsub__(self, other: "TensorLike") -> "Tensor":
        return ops.sub(other, self)

    def __mul__(self, other: "TensorLike") -> "Tensor":
        return ops.mul(self, other)

    def __rmul__(self, other: "TensorLike") -> "Tensor":
        return ops.mul(other, self)

    def __truediv__(self, other: "TensorLike") -> "Tensor":
        return ops.div(self, other)

    def __rtruediv__(self, other: "TensorLike") -> "Tensor":
        return ops.div(other, self)

    def __neg__(self) -> "Tensor":
        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return ops.matmul(self, other)

    def __getitem__(self, key) -> "Tensor":
        return ops.index(self, key)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad}{label})"


TensorLike = Union[Tensor, ArrayLike]


class Graph:
    """Topologically ordered nodes reachable from an output tensor."""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes
        self._index: Dict[int, int] = {id(node): i for i, node in enumerate(nodes)}

    @classmethod
    def trace(cls, output: Tensor) -> "Graph":
        """Collect every node the output depends on, parents before children."""
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        # Iterative post-order DFS; deep nets would overflow the recursion limit
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node.parents):
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def __contains__(self, tensor: object) -> bool:
        return id(tensor) in self._index

    def __len__(self) -> int:
        return len(self.nodes)


class GradientMap:
    """Gradients of one scalar with respect to a set of leaf tensors."""

    def __init__(self, leaves: Sequence[Tensor], grads: Dict[int, np.ndarray]):
        self._leaves = list(leaves)
        self._grads = grads

    def __getitem__(self, leaf: Tensor) -> np.ndarray:
        try:
            return self._grads[id(leaf)]
        except KeyError:
            raise KeyError(f"No gradient was requested for {leaf!r}") from None

    def __contains__(self, leaf: object) -> bool:
        return id(leaf) in self._grads

    def __len__(self) -> int:
        return len(self._leaves)

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self._leaves)

    def items(self) -> Iterator[Tuple[Tensor, np.ndarray]]:
        for leaf in self._leaves:
            yield leaf, self._grads[id(leaf)]


def backward(graph: Graph, loss: Tensor, leaves: Sequence[Tensor]) -> GradientMap:
    """
    Reverse-mode differentiation of a scalar node.

    Args:
        graph: Graph containing the loss and the leaves
        loss: Single-element node to differentiate
        leaves: Tensors whose gradients are requested

    Returns:
        Gradient for each requested leaf, shape-matched to it

    Raises:
        GraphError: If the loss is not a scalar node of the graph or a leaf
            does not take part in the graph
    """
    if loss not in graph:
        raise GraphError("loss is not a node of the graph")
    if loss.size != 1:
        raise GraphError(f"loss must be a scalar, got shape {loss.shape}")
    for leaf in leaves:
        if leaf not in graph:
            raise GraphError(f"leaf {leaf!r} is not in the graph")

    leaf_ids = {id(leaf) for leaf in leaves}

    # A node needs a gradient when some requested leaf flows into it
    needed: Dict[int, bool] = {}
    for node in graph.nodes:
        needed[id(node)] = id(node) in leaf_ids or any(needed[id(p)] for p in node.parents)

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        grad_out = grads.get(id(node))
        if grad_out is None or node._backward is None:
            continue
        needs = tuple(needed[id(p)] for p in node.parents)
        if not any(needs):
            continue
        parent_grads = node._backward(grad_out, needs)
        for parent, parent_grad, need in zip(node.parents, parent_grads, needs):
            if not need or parent_grad is None:
                continue
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
        if id(node) not in leaf_ids:
            del grads[id(node)]

    result = {
        id(leaf): grads[id(leaf)] if id(leaf) in grads else np.zeros_like(leaf.data)
        for leaf in leaves
    }
    return GradientMap(leaves, result)


def grad(loss: Tensor, leaves: Sequence[Tensor]) -> GradientMap:
    """Trace the graph of ``loss`` and differentiate it."""
    return backward(Graph.trace(loss), loss, leaves)


# Late import: ops needs Tensor defined above
from modedg.autodiff import ops  # noqa: E402
