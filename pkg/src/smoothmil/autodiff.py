"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tape` records every primitive executed while it is active (the
innermost active tape wins). ``Tape.backward(root)`` replays the records in
reverse execution order, which is a valid topological order by construction,
and accumulates gradients into per-tensor buffers. The walk is a pure
function of the tape, so several roots can be differentiated on one tape.

Primitives executed with no active tape just compute values; this is the
fast path used for validation/test-set evaluation.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_TAPE_STACK: list["Tape"] = []


class Tensor:
    """Dense float64 array, the only value type the engine differentiates.

    Data is row-major and non-empty. Tensors are plain value carriers: the
    computation graph lives on the recording tape, not on the tensor.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.size == 0:
            raise ValueError("tensors must contain at least one element")
        self.data = arr

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    # operator sugar; all routing goes through the module-level primitives
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Gradients:
    """Result of a backward pass: d(root)/d(tensor) per touched tensor.

    Tensors that do not influence the root are absent from the internal map
    and report an all-zero gradient.
    """

    def __init__(self, buffers: dict):
        self._buffers = buffers  # id(tensor) -> (tensor ref, ndarray)

    def wrt(self, t: Tensor) -> np.ndarray:
        entry = self._buffers.get(id(t))
        if entry is None:
            return np.zeros_like(t.data)
        return entry[1]


class Tape:
    """Ordered record of primitive operations, used as a context manager.

    Each entry holds the output tensor, the input tensors, and a pull
    function mapping the output gradient to input gradients. Entries are
    appended in execution order, so every operand of entry k was produced
    by an earlier entry or is a leaf.
    """

    def __init__(self):
        self.entries: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPE_STACK.pop()
        return False

    def backward(self, root: Tensor) -> Gradients:
        """Reverse sweep from a scalar root; returns the gradient map."""
        if root.ndim != 0:
            raise ValueError(f"backward root must be scalar, got shape {root.shape}")
        buffers: dict[int, list] = {  # id -> [tensor ref, grad array]
            id(root): [root, np.ones((), dtype=np.float64)]
        }
        for out, inputs, pull in reversed(self.entries):
            got = buffers.get(id(out))
            if got is None:
                continue
            grads = pull(got[1])
            for t, g in zip(inputs, grads):
                if g is None:
                    continue
                slot = buffers.get(id(t))
                if slot is None:
                    # copy: pull functions may return views or shared arrays
                    buffers[id(t)] = [t, np.array(g, dtype=np.float64)]
                else:
                    slot[1] = slot[1] + g
        return Gradients(buffers)


def _record(out: Tensor, inputs: tuple, pull: Callable) -> None:
    if _TAPE_STACK:
        _TAPE_STACK[-1].entries.append((out, inputs, pull))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise primitives


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ashape, bshape = a.shape, b.shape
    try:
        out = Tensor(a.data + b.data)
    except ValueError:
        raise ValueError(f"add: incompatible shapes {ashape} and {bshape}") from None

    def pull(g):
        return _unbroadcast(g, ashape), _unbroadcast(g, bshape)

    _record(out, (a, b), pull)
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ashape, bshape = a.shape, b.shape
    try:
        out = Tensor(a.data - b.data)
    except ValueError:
        raise ValueError(f"sub: incompatible shapes {ashape} and {bshape}") from None

    def pull(g):
        return _unbroadcast(g, ashape), _unbroadcast(-g, bshape)

    _record(out, (a, b), pull)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    try:
        out = Tensor(ad * bd)
    except ValueError:
        raise ValueError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def pull(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    _record(out, (a, b), pull)
    return out


def neg(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(-x.data)
    _record(out, (x,), lambda g: (-g,))
    return out


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    t = np.tanh(x.data)
    out = Tensor(t)
    _record(out, (x,), lambda g: (g * (1.0 - t * t),))
    return out


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    xd = x.data
    # overflow-safe split form
    s = np.where(xd >= 0, 1.0 / (1.0 + np.exp(-np.abs(xd))),
                 np.exp(-np.abs(xd)) / (1.0 + np.exp(-np.abs(xd))))
    out = Tensor(s)
    _record(out, (x,), lambda g: (g * s * (1.0 - s),))
    return out


def exp(x) -> Tensor:
    x = _as_tensor(x)
    e = np.exp(x.data)
    out = Tensor(e)
    _record(out, (x,), lambda g: (g * e,))
    return out


def log(x) -> Tensor:
    x = _as_tensor(x)
    xd = x.data
    bad = xd <= 0.0
    if bad.any():
        i = int(np.argmax(bad.reshape(-1)))
        raise ValueError(
            f"log: non-positive entry {xd.reshape(-1)[i]!r} at flat index {i}")
    out = Tensor(np.log(xd))
    _record(out, (x,), lambda g: (g / xd,))
    return out


def square(x) -> Tensor:
    x = _as_tensor(x)
    xd = x.data
    out = Tensor(xd * xd)
    _record(out, (x,), lambda g: (2.0 * xd * g,))
    return out


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes only strictly inside."""
    x = _as_tensor(x)
    xd = x.data
    out = Tensor(np.clip(xd, lo, hi))
    mask = (xd > lo) & (xd < hi)
    _record(out, (x,), lambda g: (g * mask,))
    return out


# ---------------------------------------------------------------------------
# structural and reduction primitives


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ValueError(f"transpose expects a matrix, got shape {x.shape}")
    out = Tensor(x.data.T.copy())
    _record(out, (x,), lambda g: (g.T,))
    return out


def matmul(a, b) -> Tensor:
    """Matrix product with numpy semantics for 1-D operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ValueError(f"matmul supports 1-D/2-D operands, got {a.shape} and {b.shape}")
    inner_a = ad.shape[-1]
    inner_b = bd.shape[0]
    if inner_a != inner_b:
        raise ValueError(f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}")
    out = Tensor(ad @ bd)

    def pull(g):
        if a.ndim == 2 and b.ndim == 2:
            return g @ bd.T, ad.T @ g
        if a.ndim == 2 and b.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        if a.ndim == 1 and b.ndim == 2:
            return bd @ g, np.outer(ad, g)
        return g * bd, g * ad

    _record(out, (a, b), pull)
    return out


def reduce_sum(x, axis: int | None = None) -> Tensor:
    x = _as_tensor(x)
    _check_axis(x, axis, "sum")
    xd = x.data
    out = Tensor(xd.sum(axis=axis))

    def pull(g):
        if axis is None:
            return (np.full(xd.shape, g),)
        return (np.broadcast_to(np.expand_dims(g, axis), xd.shape),)

    _record(out, (x,), pull)
    return out


def reduce_mean(x, axis: int | None = None) -> Tensor:
    x = _as_tensor(x)
    _check_axis(x, axis, "mean")
    xd = x.data
    n = xd.size if axis is None else xd.shape[axis]
    out = Tensor(xd.mean(axis=axis))

    def pull(g):
        if axis is None:
            return (np.full(xd.shape, g / n),)
        return (np.broadcast_to(np.expand_dims(g / n, axis), xd.shape),)

    _record(out, (x,), pull)
    return out


def reduce_max(x, axis: int | None = None) -> Tensor:
    """Max reduction; ties route the gradient to the lowest index."""
    x = _as_tensor(x)
    _check_axis(x, axis, "max")
    xd = x.data
    if axis is None:
        idx = int(np.argmax(xd))  # first maximum in row-major order
        out = Tensor(xd.reshape(-1)[idx])

        def pull(g):
            z = np.zeros_like(xd)
            z.reshape(-1)[idx] = g
            return (z,)
    else:
        idx = np.expand_dims(np.argmax(xd, axis=axis), axis)
        out = Tensor(np.take_along_axis(xd, idx, axis).squeeze(axis))

        def pull(g):
            z = np.zeros_like(xd)
            np.put_along_axis(z, idx, np.expand_dims(g, axis), axis)
            return (z,)

    _record(out, (x,), pull)
    return out


def softmax(x) -> Tensor:
    """Softmax of a vector, computed with max-subtraction for overflow safety."""
    x = _as_tensor(x)
    if x.ndim != 1:
        raise ValueError(f"softmax expects a vector, got shape {x.shape}")
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    s = e / e.sum()
    out = Tensor(s)
    _record(out, (x,), lambda g: (s * (g - float(g @ s)),))
    return out


def _check_axis(x: Tensor, axis: int | None, name: str) -> None:
    if axis is not None and not (-x.ndim <= axis < x.ndim):
        raise ValueError(f"{name}: axis {axis} invalid for shape {x.shape}")


# ---------------------------------------------------------------------------
# gradient checking


def check_gradient(fn: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-6) -> float:
    """Compare taped gradients of fn at x against central finite differences.

    Returns max over coordinates of |analytic - fd| / max(1, |analytic|).
    """
    with Tape() as tape:
        y = fn(x)
    if y.ndim != 0:
        raise ValueError("check_gradient requires a scalar-valued function")
    if not np.isfinite(y.item()):
        raise ValueError("check_gradient: non-finite function value at x")
    analytic = tape.backward(y).wrt(x).reshape(-1)

    fd = np.zeros_like(analytic)
    for i in range(fd.size):
        vals = []
        for delta in (step, -step):
            xp = x.data.copy()
            xp.reshape(-1)[i] += delta
            v = fn(Tensor(xp)).item()
            if not np.isfinite(v):
                raise ValueError(f"check_gradient: non-finite evaluation at coordinate {i}")
            vals.append(v)
        fd[i] = (vals[0] - vals[1]) / (2.0 * step)

    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - fd) / denom)) if fd.size else 0.0
