"""Dense tensors with tape-based reverse-mode differentiation.

The models in this package run at desk scale: states are [1, H] row
vectors, scalars are [1, 1], and every training step records its forward
pass on one explicit tape that is swept once in reverse.  Inference runs
tape-free.  float32 is the working dtype; `using_dtype` exists so that
numerical test suites can run the identical op implementations in float64,
where central finite differences are meaningful.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "tape",
    "backward",
    "using_dtype",
    "default_dtype",
    "parameter",
    "zero_parameter",
    "zeros",
    "add",
    "mul",
    "matmul",
    "affine",
    "transpose",
    "tanh",
    "sigmoid",
    "softmax",
    "log",
    "concat",
    "rows",
    "row",
    "pick",
    "embedding_lookup",
    "scatter_sum",
    "Adam",
]

_DTYPE_STACK = [np.float32]


def default_dtype():
    """dtype given to tensors created right now."""
    return _DTYPE_STACK[-1]


@contextlib.contextmanager
def using_dtype(dtype):
    """Temporarily create tensors with a different dtype (e.g. float64)."""
    _DTYPE_STACK.append(np.dtype(dtype).type)
    try:
        yield
    finally:
        _DTYPE_STACK.pop()


class Tensor:
    """A dense array with an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=default_dtype())
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.data.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def sum(self) -> "Tensor":
        return _sum_all(self)

    def mean(self) -> "Tensor":
        return mul(_sum_all(self), 1.0 / self.data.size)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, mul(other, -1.0))
        return add(self, -other)

    def __rsub__(self, other):
        # other - self, with other a plain number (e.g. 1.0 - gate)
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


# ---------------------------------------------------------------------------
# tape

class Tape:
    """Ordered record of executed ops, replayed in reverse by backward()."""

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __len__(self) -> int:
        return len(self._records)

    def clear(self) -> None:
        """Drop every record, releasing the tensors they reference."""
        self._records.clear()

    def backward(self, root: Tensor) -> None:
        """Populate grads of everything the scalar `root` depends on.

        Repeated calls without zeroing accumulate, so two sweeps double the
        gradient of every reachable tensor.
        """
        if root.data.size != 1:
            raise ValueError(f"backward needs a scalar root, got shape {root.data.shape}")
        if not root.requires_grad:
            raise ValueError("backward root was not recorded on a tape")
        seed = np.ones_like(root.data)
        _accumulate(root, seed)
        # per-sweep contributions; .grad holds the running cumulative total
        delta: dict[int, np.ndarray] = {id(root): seed}
        for out, inputs, vjp in reversed(self._records):
            g_out = delta.pop(id(out), None)
            if g_out is None:
                continue
            for tensor, grad in zip(inputs, vjp(g_out)):
                if grad is None or not tensor.requires_grad:
                    continue
                _accumulate(tensor, grad)
                key = id(tensor)
                prev = delta.get(key)
                delta[key] = grad if prev is None else prev + grad


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.grad is None:
        tensor.grad = np.array(grad, copy=True)
    else:
        tensor.grad += grad


_ACTIVE_TAPE: Tape | None = None


@contextlib.contextmanager
def tape():
    """Open the recording tape for one training step.  Tapes do not nest."""
    global _ACTIVE_TAPE
    if _ACTIVE_TAPE is not None:
        raise RuntimeError("a tape is already active; open one tape per training step")
    t = Tape()
    _ACTIVE_TAPE = t
    try:
        yield t
    finally:
        _ACTIVE_TAPE = None
        t.clear()


def backward(root: Tensor) -> None:
    """Sweep the currently active tape from `root`."""
    if _ACTIVE_TAPE is None:
        raise RuntimeError("no active tape; call backward inside `with tape(): ...`")
    _ACTIVE_TAPE.backward(root)


def _push(data: np.ndarray, inputs: tuple[Tensor, ...], vjp: Callable) -> Tensor:
    """Wrap an op result, recording it when a tape is active and needed."""
    track = _ACTIVE_TAPE is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track)
    if track:
        _ACTIVE_TAPE._records.append((out, inputs, vjp))
    return out


# ---------------------------------------------------------------------------
# construction helpers

def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=default_dtype()))


def parameter(rng: np.random.Generator, shape, scale: float = 0.1) -> Tensor:
    """Trainable tensor, uniform in [-scale, scale]."""
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


def zero_parameter(shape) -> Tensor:
    """Trainable tensor initialized to zero (biases)."""
    return Tensor(np.zeros(shape, dtype=default_dtype()), requires_grad=True)


# ---------------------------------------------------------------------------
# ops

def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, inverting numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        shift = float(b)
        return _push(a.data + shift, (a,), lambda g: (g,))
    data = a.data + b.data
    a_shape, b_shape = a.data.shape, b.data.shape

    def vjp(g):
        return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

    return _push(data, (a, b), vjp)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        factor = float(b)
        return _push(a.data * factor, (a,), lambda g: (g * factor,))
    a_data, b_data = a.data, b.data

    def vjp(g):
        return (_unbroadcast(g * b_data, a_data.shape),
                _unbroadcast(g * a_data, b_data.shape))

    return _push(a_data * b_data, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} x {b.data.shape}")
    a_data, b_data = a.data, b.data

    def vjp(g):
        return g @ b_data.T, a_data.T @ g

    return _push(a_data @ b_data, (a, b), vjp)


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight + bias, with bias a [1, n] row added to every row of x."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.data.shape[1] != weight.data.shape[0]:
        raise ValueError(f"affine shape mismatch: {x.data.shape} x {weight.data.shape}")
    if bias.data.shape != (1, weight.data.shape[1]):
        raise ValueError(f"affine bias shape {bias.data.shape}, expected (1, {weight.data.shape[1]})")
    x_data, w_data = x.data, weight.data

    def vjp(g):
        return g @ w_data.T, x_data.T @ g, g.sum(axis=0, keepdims=True)

    return _push(x_data @ w_data + bias.data, (x, weight, bias), vjp)


def transpose(x: Tensor) -> Tensor:
    return _push(x.data.T.copy(), (x,), lambda g: (g.T,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _push(out, (x,), lambda g: (g * (1.0 - out * out),))


def _sigmoid_values(x: np.ndarray) -> np.ndarray:
    # split form avoids overflow in exp for large |x|; saturates to exact 0/1
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    out[~positive] = ex / (1.0 + ex)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid_values(x.data)
    return _push(out, (x,), lambda g: (g * out * (1.0 - out),))


def softmax(x: Tensor, axis: int = 1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _push(out, (x,), vjp)


def log(x: Tensor, floor: float = 0.0) -> Tensor:
    """Natural log; with floor > 0, values are clamped from below first."""
    if floor > 0.0:
        safe = np.maximum(x.data, floor)
        data = np.log(safe)
        mask = x.data > floor

        def vjp(g):
            return (np.where(mask, g / safe, 0.0),)

        return _push(data, (x,), vjp)
    x_data = x.data

    def vjp_plain(g):
        return (g / x_data,)

    return _push(np.log(x_data), (x,), vjp_plain)


def _sum_all(x: Tensor) -> Tensor:
    data = np.array([[x.data.sum()]], dtype=x.data.dtype)
    x_shape = x.data.shape

    def vjp(g):
        return (np.full(x_shape, g[0, 0], dtype=g.dtype),)

    return _push(data, (x,), vjp)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ValueError("concat needs at least one tensor")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = np.cumsum([p.data.shape[axis] for p in parts])[:-1]

    def vjp(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _push(data, tuple(parts), vjp)


def rows(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous row slice x[start:stop] as a new tensor."""
    n = x.data.shape[0]
    if not (0 <= start < stop <= n):
        raise IndexError(f"row slice [{start}:{stop}] outside [0, {n}]")
    x_shape = x.data.shape

    def vjp(g):
        full = np.zeros(x_shape, dtype=g.dtype)
        full[start:stop] = g
        return (full,)

    return _push(x.data[start:stop].copy(), (x,), vjp)


def row(x: Tensor, index: int) -> Tensor:
    return rows(x, index, index + 1)


def pick(x: Tensor, i: int, j: int) -> Tensor:
    """Single entry x[i, j] as a [1, 1] tensor."""
    n, m = x.data.shape
    if not (0 <= i < n and 0 <= j < m):
        raise IndexError(f"pick ({i}, {j}) outside shape {x.data.shape}")
    x_shape = x.data.shape

    def vjp(g):
        full = np.zeros(x_shape, dtype=g.dtype)
        full[i, j] = g[0, 0]
        return (full,)

    return _push(np.array([[x.data[i, j]]], dtype=x.data.dtype), (x,), vjp)


def embedding_lookup(table: Tensor, token_ids) -> Tensor:
    """Gather rows of `table`; backward scatter-adds into the table."""
    ids = np.asarray(list(token_ids), dtype=np.int64)
    n_rows = table.data.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n_rows):
        bad = ids[(ids < 0) | (ids >= n_rows)][0]
        raise IndexError(f"token id {int(bad)} outside embedding range [0, {n_rows})")
    if ids.size == 0:
        data = np.zeros((0, table.data.shape[1]), dtype=table.data.dtype)
    else:
        data = table.data[ids]
    table_shape = table.data.shape

    def vjp(g):
        full = np.zeros(table_shape, dtype=g.dtype)
        np.add.at(full, ids, g)
        return (full,)

    return _push(data, (table,), vjp)


def scatter_sum(x: Tensor, indices, size: int) -> Tensor:
    """Route a [1, n] row into a [1, size] row, summing collisions."""
    ids = np.asarray(list(indices), dtype=np.int64)
    if x.data.shape != (1, ids.size):
        raise ValueError(f"scatter_sum needs x of shape (1, {ids.size}), got {x.data.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= size):
        bad = ids[(ids < 0) | (ids >= size)][0]
        raise IndexError(f"scatter index {int(bad)} outside [0, {size})")
    data = np.zeros((1, size), dtype=x.data.dtype)
    np.add.at(data[0], ids, x.data[0])

    def vjp(g):
        return (g[:, ids].reshape(1, -1) if ids.size else np.zeros((1, 0), dtype=g.dtype),)

    return _push(data, (x,), vjp)


# ---------------------------------------------------------------------------
# optimizer

class Adam:
    """Adam with in-place updates; the caller zeroes gradients between steps."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"parameter '{name}' has no gradient; run backward first")
            g = p.grad
            m, v = self._m[name], self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
