"""
reverse-mode differentiation over numpy arrays.

a Tensor remembers the Function that produced it. calling backward() on a
scalar tensor walks the recorded graph in reverse topological order and
accumulates gradients into every leaf that requires them (Parameters).
"""

import contextlib
import logging

import numpy as np

from dtrsum.core.errors import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """evaluate without recording a graph (outputs are constants)."""

    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def check_finite(array: np.ndarray, op: str) -> None:
    """raise NonFiniteError naming the op if the array holds NaN or Inf."""

    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NonFiniteError(op, f"{bad} of {np.size(array)} entries are NaN/Inf")


class Tensor:
    """
    dense float64 array with an optional link to the op that produced it.

    tensors are treated as immutable once created; only optimizer steps
    mutate parameter data in place.
    """

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._ctx: "Function | None" = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """same values, no history: gradients stop here."""
        return Tensor(self.data)

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"<Tensor shape={self.shape}{label} requires_grad={self.requires_grad}>"

    def backward(self) -> None:
        """
        populate .grad of every leaf reachable from this scalar.

        raises:
            ShapeError: if this tensor is not a scalar
            NonFiniteError: if a backward rule produces NaN/Inf
        """

        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            return

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue

            if node._ctx is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue

            ctx = node._ctx
            parent_grads = ctx.backward(grad)
            for parent, parent_grad in zip(ctx.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent_grad.shape != parent.shape:
                    raise ShapeError(
                        f"backward of '{ctx.op_name}' returned gradient of shape "
                        f"{parent_grad.shape} for input of shape {parent.shape}"
                    )
                check_finite(parent_grad, f"{ctx.op_name}.backward")
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    def _topological_order(self) -> list["Tensor"]:
        # iterative post-order DFS; inputs precede the nodes that consume them
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.parents:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order


class Parameter(Tensor):
    """learnable tensor with a gradient slot and a dotted name path."""

    def __init__(self, data, name: str):
        # own, contiguous storage so in-place updates never alias caller arrays
        super().__init__(np.array(data, dtype=DTYPE, order="C"), requires_grad=True, name=name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"<Parameter {self.name} shape={self.shape}>"


class Function:
    """
    one differentiable operation.

    subclasses implement forward() on raw arrays and backward(), which maps
    the output gradient to one gradient (or None) per input tensor.
    """

    op_name = "function"

    def __init__(self, *parents: Tensor):
        self.parents = parents

    @classmethod
    def apply(cls, *parents: Tensor, **kwargs) -> Tensor:
        fn = cls(*parents)
        out = fn.forward(*[p.data for p in parents], **kwargs)
        check_finite(out, cls.op_name)
        result = Tensor(out)
        if _grad_enabled and any(p.requires_grad for p in parents):
            result.requires_grad = True
            result._ctx = fn
        return result

    def forward(self, *arrays: np.ndarray, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError


def forward_backward(loss_fn, params) -> float:
    """
    zero the gradient slots, evaluate the scalar loss and backpropagate.

    args:
        loss_fn: zero-argument callable building the graph and returning the loss
        params: parameters whose gradients should be populated

    returns:
        the loss value
    """

    for param in params:
        param.zero_grad()
    loss = loss_fn()
    loss.backward()
    return loss.item()
