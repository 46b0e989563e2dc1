"""Dense float64 tensors with reverse-mode automatic differentiation.

Every op records its parents and a closure that maps the output gradient to
one gradient per parent. ``Tensor.backward`` walks the recorded graph in
reverse topological order and accumulates into ``.grad`` of every node that
requires it.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError, DimensionError


class BackwardError(RuntimeError):
    pass


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block. Forward values are unchanged."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if isinstance(data, np.ndarray) and data.dtype == np.float64:
            arr = data
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._backward: Callable | None = None
        self._consumed = False
        self.name = name

    # -- bookkeeping -------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __len__(self) -> int:
        return len(self.data)

    @staticmethod
    def _make(data: np.ndarray, parents: Sequence["Tensor"], backward: Callable) -> "Tensor":
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise BackwardError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if self._consumed:
            raise BackwardError("backward() already ran on this graph; rebuild it before calling again")
        if not self.requires_grad:
            raise BackwardError("loss does not depend on any tensor that requires grad")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        self._consumed = True

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor._make(self.data + other.data, (self, other),
                            lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor._make(self.data - other.data, (self, other),
                            lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)))

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor._make(x * y, (self, other),
                            lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor._make(x / y, (self, other),
                            lambda g: (_unbroadcast(g / y, x.shape),
                                       _unbroadcast(-g * x / (y * y), y.shape)))

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other) / self

    def __neg__(self) -> "Tensor":
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, p: float) -> "Tensor":
        x = self.data
        return Tensor._make(x ** p, (self,), lambda g: (g * p * x ** (p - 1),))

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, idx) -> "Tensor":
        x = self.data
        out = x[idx]

        def bw(g):
            full = np.zeros_like(x)
            np.add.at(full, idx, g)
            return (full,)

        # basic slicing never repeats an element, so plain assignment is enough
        if _is_basic_index(idx):
            def bw(g):  # noqa: F811
                full = np.zeros_like(x)
                full[idx] = g
                return (full,)

        return Tensor._make(np.array(out, copy=True), (self,), bw)

    # -- reductions and shape ---------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), bw)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return Tensor._make(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),))

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = np.argsort(axes)
        return Tensor._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),))

    def swapaxes(self, a: int, b: int) -> "Tensor":
        return Tensor._make(np.swapaxes(self.data, a, b), (self,), lambda g: (np.swapaxes(g, a, b),))

    # -- pointwise nonlinearities -----------------------------------------

    def exp(self) -> "Tensor":
        y = np.exp(self.data)
        return Tensor._make(y, (self,), lambda g: (g * y,))

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)
        return Tensor._make(y, (self,), lambda g: (g * (1.0 - y * y),))

    def abs(self) -> "Tensor":
        s = np.sign(self.data)
        return Tensor._make(np.abs(self.data), (self,), lambda g: (g * s,))


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul batch extents not broadcastable: {a.shape} @ {b.shape}") from None
    x, y = a.data, b.data

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(y, -1, -2), x.shape)
        gb = _unbroadcast(np.swapaxes(x, -1, -2) @ g, y.shape)
        return ga, gb

    return Tensor._make(x @ y, (a, b), bw)


def einsum(spec: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum with explicit output subscripts and no ellipsis.

    Every index of each operand must appear in the output or in the other
    operand, which is all the model needs and keeps the adjoint a single
    einsum per side.
    """
    a, b = as_tensor(a), as_tensor(b)
    lhs, out_sub = spec.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    if len(sa) != a.ndim or len(sb) != b.ndim:
        raise DimensionError(f"einsum '{spec}' does not fit shapes {a.shape}, {b.shape}")
    sizes: dict[str, int] = {}
    for sub, shape in ((sa, a.shape), (sb, b.shape)):
        for ch, n in zip(sub, shape):
            if sizes.setdefault(ch, n) != n:
                raise DimensionError(f"einsum '{spec}': index {ch!r} has extents {sizes[ch]} and {n}")
    x, y = a.data, b.data

    def bw(g):
        ga = np.einsum(f"{out_sub},{sb}->{sa}", g, y, optimize=True)
        gb = np.einsum(f"{out_sub},{sa}->{sb}", g, x, optimize=True)
        return ga, gb

    return Tensor._make(np.einsum(spec, x, y, optimize=True), (a, b), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._make(np.stack([t.data for t in tensors], axis=axis), tensors, bw)


def take(x: Tensor, indices, axis: int) -> Tensor:
    """Gather distinct positions along ``axis``."""
    idx = np.asarray(indices, dtype=np.int64)
    if len(np.unique(idx)) != len(idx):
        raise ValueError("take() requires distinct indices")
    shape = x.shape

    def bw(g):
        full = np.zeros(shape)
        sl = [slice(None)] * len(shape)
        sl[axis] = idx
        full[tuple(sl)] = g
        return (full,)

    return Tensor._make(np.take(x.data, idx, axis=axis), (x,), bw)


def gather_time(x: Tensor, index: np.ndarray) -> Tensor:
    """out[b, t, j, ...] = x[b, index[b, t, j], j, ...] for x of shape [B, T, n, ...].

    Repeated source indices are allowed (replicated boundaries); the adjoint
    scatters with accumulation.
    """
    B, T, n = index.shape
    bi = np.arange(B)[:, None, None]
    ji = np.arange(n)[None, None, :]
    out = x.data[bi, index, ji]
    shape = x.shape

    def bw(g):
        full = np.zeros(shape)
        np.add.at(full, (np.broadcast_to(bi, index.shape), index, np.broadcast_to(ji, index.shape)), g)
        return (full,)

    return Tensor._make(out, (x,), bw)


def where(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    m = np.asarray(mask, dtype=bool)
    return Tensor._make(np.where(m, a.data, b.data), (a, b),
                        lambda g: (_unbroadcast(np.where(m, g, 0.0), a.shape),
                                   _unbroadcast(np.where(m, 0.0, g), b.shape)))


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=requires_grad)
