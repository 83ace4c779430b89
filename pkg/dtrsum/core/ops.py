"""
differentiable primitives.

each op is a Function subclass with a thin wrapper that validates shapes
and returns a Tensor. the fused ops at the bottom (batch norm, LSTM
recurrence) carry hand-written backward rules.
"""

import numpy as np

from dtrsum.core.errors import ShapeError, ValidationError
from dtrsum.core.tensor import Function, Tensor


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """logistic function without overflow for large |x|."""

    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def _shift_rows(array: np.ndarray, offset: int) -> np.ndarray:
    # out[t] = array[t + offset], zero where t + offset falls outside
    out = np.zeros_like(array)
    n = array.shape[0]
    if abs(offset) >= n:
        return out
    if offset >= 0:
        out[: n - offset] = array[offset:]
    else:
        out[-offset:] = array[: n + offset]
    return out


class Add(Function):
    op_name = "add"

    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    op_name = "sub"

    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    op_name = "mul"

    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return _unbroadcast(grad * self.b, self.a.shape), _unbroadcast(grad * self.a, self.b.shape)


class Scale(Function):
    op_name = "scale"

    def forward(self, a, *, factor):
        self.factor = factor
        return a * factor

    def backward(self, grad):
        return (grad * self.factor,)


class MatMul(Function):
    op_name = "matmul"

    def forward(self, a, b):
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


class Concat(Function):
    op_name = "concat"

    def forward(self, *arrays, axis):
        self.axis = axis
        self.splits = np.cumsum([array.shape[axis] for array in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Sigmoid(Function):
    op_name = "sigmoid"

    def forward(self, x):
        self.out = stable_sigmoid(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Tanh(Function):
    op_name = "tanh"

    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class Relu(Function):
    op_name = "relu"

    def forward(self, x):
        self.active = x > 0
        return np.where(self.active, x, 0.0)

    def backward(self, grad):
        return (np.where(self.active, grad, 0.0),)


class Sum(Function):
    op_name = "sum"

    def forward(self, x):
        self.shape = x.shape
        return np.asarray(x.sum())

    def backward(self, grad):
        return (np.full(self.shape, grad.reshape(-1)[0]),)


class Mean(Function):
    op_name = "mean"

    def forward(self, x):
        self.shape = x.shape
        return np.asarray(x.mean())

    def backward(self, grad):
        return (np.full(self.shape, grad.reshape(-1)[0] / max(1, int(np.prod(self.shape)))),)


class SumOfSquares(Function):
    op_name = "sum_of_squares"

    def forward(self, x):
        self.x = x
        return np.asarray(np.sum(x * x))

    def backward(self, grad):
        return (2.0 * self.x * grad.reshape(-1)[0],)


class RowScale(Function):
    op_name = "row_scale"

    def forward(self, x, s):
        self.x, self.s = x, s
        return x * s[:, None]

    def backward(self, grad):
        return grad * self.s[:, None], np.sum(grad * self.x, axis=1)


class Shift(Function):
    op_name = "shift"

    def forward(self, x, *, offset):
        self.offset = offset
        return _shift_rows(x, offset)

    def backward(self, grad):
        return (_shift_rows(grad, -self.offset),)


class SliceRows(Function):
    op_name = "slice_rows"

    def forward(self, x, *, start, stop):
        self.shape, self.start, self.stop = x.shape, start, stop
        return x[start:stop].copy()

    def backward(self, grad):
        full = np.zeros(self.shape)
        full[self.start:self.stop] = grad
        return (full,)


class Reshape(Function):
    op_name = "reshape"

    def forward(self, x, *, shape):
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Stack(Function):
    op_name = "stack"

    def forward(self, *arrays):
        return np.stack(arrays)

    def backward(self, grad):
        return tuple(grad[index] for index in range(grad.shape[0]))


class TimeStep(Function):
    op_name = "time_step"

    def forward(self, x, *, index):
        self.shape, self.index = x.shape, index
        return x[:, index].copy()

    def backward(self, grad):
        full = np.zeros(self.shape)
        full[:, self.index] = grad
        return (full,)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return Add.apply(a, b)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return Sub.apply(a, b)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return Mul.apply(a, b)


def scale(a, factor: float) -> Tensor:
    return Scale.apply(as_tensor(a), factor=float(factor))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return MatMul.apply(a, b)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: nothing to concatenate")
    reference = tensors[0]
    axis = axis % reference.ndim
    for tensor in tensors[1:]:
        if tensor.ndim != reference.ndim or any(
            tensor.shape[i] != reference.shape[i] for i in range(reference.ndim) if i != axis
        ):
            raise ShapeError(f"concat: shapes {reference.shape} and {tensor.shape} disagree off axis {axis}")
    if len(tensors) == 1:
        return tensors[0]
    return Concat.apply(*tensors, axis=axis)


def sigmoid(x) -> Tensor:
    return Sigmoid.apply(as_tensor(x))


def tanh(x) -> Tensor:
    return Tanh.apply(as_tensor(x))


def relu(x) -> Tensor:
    return Relu.apply(as_tensor(x))


def reduce_sum(x) -> Tensor:
    return Sum.apply(as_tensor(x))


def mean(x) -> Tensor:
    return Mean.apply(as_tensor(x))


def sum_of_squares(x) -> Tensor:
    return SumOfSquares.apply(as_tensor(x))


def row_scale(x, s) -> Tensor:
    """scale row t of a T×D matrix by entry t of a length-T vector."""

    x, s = as_tensor(x), as_tensor(s)
    if x.ndim != 2 or s.ndim != 1 or x.shape[0] != s.shape[0]:
        raise ShapeError(f"row_scale: matrix {x.shape} and vector {s.shape} disagree")
    return RowScale.apply(x, s)


def shift(x, offset: int) -> Tensor:
    x = as_tensor(x)
    if x.ndim < 1:
        raise ShapeError("shift: needs at least one axis")
    return Shift.apply(x, offset=int(offset))


def slice_rows(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    if not 0 <= start < stop <= x.shape[0]:
        raise ShapeError(f"slice_rows: [{start}, {stop}) outside {x.shape[0]} rows")
    return SliceRows.apply(x, start=start, stop=stop)


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    return Reshape.apply(x, shape=tuple(shape))


def stack(tensors) -> Tensor:
    """join equally shaped tensors along a new leading batch axis."""

    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack: nothing to stack")
    for tensor in tensors[1:]:
        if tensor.shape != tensors[0].shape:
            raise ShapeError(f"stack: shapes {tensors[0].shape} and {tensor.shape} differ")
    return Stack.apply(*tensors)


def time_step(x, index: int) -> Tensor:
    """row index of every sequence in a B×T×H batch, as a B×H matrix."""

    x = as_tensor(x)
    if x.ndim != 3 or not 0 <= index < x.shape[1]:
        raise ShapeError(f"time_step: step {index} outside batch {x.shape}")
    return TimeStep.apply(x, index=index)


def dropout(x, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """inverted dropout; identity in inference mode or at rate 0."""

    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValidationError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(keep))


class BatchNorm(Function):
    """
    per-channel normalization over the rows (frames) of a T×D matrix.

    modes: "batch" uses the statistics of x, "running" uses the supplied
    running statistics, "affine" skips normalization (one-frame batches).
    """

    op_name = "batch_norm"

    def forward(self, x, gamma, beta, *, mode, running_mean=None, running_var=None, eps=1e-8):
        self.mode, self.gamma = mode, gamma
        if mode == "batch":
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            self.inv_std = 1.0 / np.sqrt(var + eps)
            self.xhat = (x - mu) * self.inv_std
        elif mode == "running":
            self.inv_std = 1.0 / np.sqrt(running_var + eps)
            self.xhat = (x - running_mean) * self.inv_std
        else:
            self.inv_std = None
            self.xhat = x
        return gamma * self.xhat + beta

    def backward(self, grad):
        grad_gamma = np.sum(grad * self.xhat, axis=0)
        grad_beta = np.sum(grad, axis=0)
        grad_xhat = grad * self.gamma
        if self.mode == "batch":
            n = grad.shape[0]
            grad_x = (self.inv_std / n) * (
                n * grad_xhat
                - np.sum(grad_xhat, axis=0)
                - self.xhat * np.sum(grad_xhat * self.xhat, axis=0)
            )
        elif self.mode == "running":
            grad_x = grad_xhat * self.inv_std
        else:
            grad_x = grad_xhat
        return grad_x, grad_gamma, grad_beta


def batch_norm(x, gamma, beta, mode: str, running_mean=None, running_var=None, eps: float = 1e-8) -> Tensor:
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: input {x.shape} with scale {gamma.shape} and shift {beta.shape}")
    if mode not in ("batch", "running", "affine"):
        raise ValidationError(f"batch_norm: unknown mode '{mode}'")
    return BatchNorm.apply(
        x, gamma, beta, mode=mode, running_mean=running_mean, running_var=running_var, eps=eps
    )


def _gate_sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form, one vectorized call per step
    return 0.5 * np.tanh(0.5 * z) + 0.5


class LstmRecurrence(Function):
    """
    full-sequence LSTM with zero initial states over a batch of sequences.

    inputs are B×T×D; gate blocks along the 4H axis are ordered input,
    forget, output, candidate. reverse=True reads each sequence from its
    last frame and returns the hidden states in the original time order.
    backward runs truncation-free BPTT.
    """

    op_name = "lstm"

    def forward(self, x, w_x, w_h, b, *, reverse=False):
        self.reverse = reverse
        if reverse:
            x = x[:, ::-1]
        batch, steps, hidden = x.shape[0], x.shape[1], w_h.shape[0]
        pre = x @ w_x + b
        h = np.zeros((batch, steps + 1, hidden))
        c = np.zeros((batch, steps + 1, hidden))
        sig = np.empty((batch, steps, 3 * hidden))
        g = np.empty((batch, steps, hidden))
        for t in range(steps):
            z = pre[:, t] + h[:, t] @ w_h
            sig[:, t] = _gate_sigmoid(z[:, :3 * hidden])
            g[:, t] = np.tanh(z[:, 3 * hidden:])
            c[:, t + 1] = sig[:, t, hidden:2 * hidden] * c[:, t] + sig[:, t, :hidden] * g[:, t]
            h[:, t + 1] = sig[:, t, 2 * hidden:] * np.tanh(c[:, t + 1])
        self.x, self.w_x, self.w_h = x, w_x, w_h
        self.h, self.c, self.sig, self.g = h, c, sig, g
        out = h[:, 1:]
        return (out[:, ::-1] if reverse else out).copy()

    def backward(self, grad):
        if self.reverse:
            grad = grad[:, ::-1]
        batch, steps, hidden = grad.shape
        i = self.sig[..., :hidden]
        f = self.sig[..., hidden:2 * hidden]
        o = self.sig[..., 2 * hidden:]
        tanh_c = np.tanh(self.c[:, 1:])
        # per-step factors that do not depend on the carried gradients
        dc_from_h = o * (1.0 - tanh_c * tanh_c)
        dz_i = self.g * i * (1.0 - i)
        dz_f = self.c[:, :-1] * f * (1.0 - f)
        dz_o = tanh_c * o * (1.0 - o)
        dz_g = i * (1.0 - self.g * self.g)

        dz = np.empty((batch, steps, 4 * hidden))
        w_h_t = self.w_h.T
        dh_next = np.zeros((batch, hidden))
        dc_next = np.zeros((batch, hidden))
        for t in range(steps - 1, -1, -1):
            dh = grad[:, t] + dh_next
            dc = dh * dc_from_h[:, t] + dc_next
            dz_t = dz[:, t]
            dz_t[:, :hidden] = dc * dz_i[:, t]
            dz_t[:, hidden:2 * hidden] = dc * dz_f[:, t]
            dz_t[:, 2 * hidden:3 * hidden] = dh * dz_o[:, t]
            dz_t[:, 3 * hidden:] = dc * dz_g[:, t]
            dh_next = dz_t @ w_h_t
            dc_next = dc * f[:, t]
        flat_dz = dz.reshape(batch * steps, 4 * hidden)
        grad_x = dz @ self.w_x.T
        grad_w_x = self.x.reshape(batch * steps, -1).T @ flat_dz
        grad_w_h = self.h[:, :-1].reshape(batch * steps, hidden).T @ flat_dz
        grad_b = flat_dz.sum(axis=0)
        if self.reverse:
            grad_x = grad_x[:, ::-1]
        return grad_x.copy(), grad_w_x, grad_w_h, grad_b


def lstm_recurrence(x, w_x, w_h, b, reverse: bool = False) -> Tensor:
    """
    hidden states of a T×D sequence (T×H out) or a B×T×D batch (B×T×H out).
    """

    x, w_x, w_h, b = as_tensor(x), as_tensor(w_x), as_tensor(w_h), as_tensor(b)
    hidden = w_h.shape[0] if w_h.ndim == 2 else -1
    if (
        x.ndim not in (2, 3)
        or w_x.shape != (x.shape[-1], 4 * hidden)
        or w_h.shape != (hidden, 4 * hidden)
        or b.shape != (4 * hidden,)
    ):
        raise ShapeError(
            f"lstm: input {x.shape}, input weights {w_x.shape}, recurrent weights {w_h.shape}, bias {b.shape}"
        )
    if x.shape[-2] == 0 or x.shape[0] == 0:
        raise ShapeError("lstm: empty sequence")
    if x.ndim == 2:
        batched = reshape(x, (1, *x.shape))
        return reshape(LstmRecurrence.apply(batched, w_x, w_h, b, reverse=reverse), (x.shape[0], hidden))
    return LstmRecurrence.apply(x, w_x, w_h, b, reverse=reverse)
