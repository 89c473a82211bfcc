"""Tape-based reverse-mode automatic differentiation on dense float64 arrays.

A :class:`Tensor` wraps a numpy array together with a gradient slot and a
closure that pushes gradients to its parents.  Graphs are built eagerly by
the overloaded operators and module-level functions below, and walked once,
in reverse topological order, by :func:`backward`.

The module-level functions (``tanh``, ``concat``, ``conv1d``, ...) are
generic: called on plain ndarrays they evaluate with numpy and return an
ndarray; called with at least one Tensor argument they record the operation.
The solver and network code is written once against this generic surface, so
the fast data-generation path and the differentiable training path share a
single source of truth for every formula.

Everything is float64.  Conservation remainders at 1e-12 and fifth-order
refinement studies are not measurable in single precision.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Array = np.ndarray

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "as_tensor",
    "value_of",
    "tanh",
    "exp",
    "sqrt",
    "absolute",
    "square",
    "reciprocal",
    "maximum",
    "concat",
    "reshape",
    "reduce_sum",
    "reduce_mean",
    "softmax_rows",
    "conv1d",
    "conv1d_local",
    "Adam",
    "adam_step",
    "finite_difference_gradient",
    "global_norm",
    "clip_gradients",
]


# ---------------------------------------------------------------------------
# tape and tensor


class Tape:
    """Records every node created while active; exists for lifetime audits.

    Gradient propagation itself walks parent links, so a tape is not needed
    for correctness; it is the unit of memory accounting (one tape per
    training window) and must be cleared once gradients have been merged.
    """

    _active: list["Tape"] = []

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def clear(self) -> None:
        self.nodes.clear()

    def __enter__(self) -> "Tape":
        Tape._active.append(self)
        return self

    def __exit__(self, *exc) -> None:
        Tape._active.pop()

    @staticmethod
    def record(node: "Tensor") -> None:
        if Tape._active:
            Tape._active[-1].nodes.append(node)


class Tensor:
    """Dense float64 array node on the reverse-mode graph."""

    # keep numpy from hijacking `ndarray <op> Tensor`
    __array_ufunc__ = None
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[Array], None] | None = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def _op(value: Array, parents: tuple["Tensor", ...], backward_fn) -> "Tensor":
        out = Tensor(value)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward_fn = backward_fn
            Tape.record(out)
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        a, b = self, as_tensor(other)

        def bwd(g):
            a._accumulate(_unbroadcast(g, a.value.shape))
            b._accumulate(_unbroadcast(g, b.value.shape))

        return Tensor._op(a.value + b.value, (a, b), bwd)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self, as_tensor(other)

        def bwd(g):
            a._accumulate(_unbroadcast(g, a.value.shape))
            b._accumulate(_unbroadcast(-g, b.value.shape))

        return Tensor._op(a.value - b.value, (a, b), bwd)

    def __rsub__(self, other):
        return as_tensor(other).__sub__(self)

    def __mul__(self, other):
        a, b = self, as_tensor(other)

        def bwd(g):
            a._accumulate(_unbroadcast(g * b.value, a.value.shape))
            b._accumulate(_unbroadcast(g * a.value, b.value.shape))

        return Tensor._op(a.value * b.value, (a, b), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, as_tensor(other)

        def bwd(g):
            a._accumulate(_unbroadcast(g / b.value, a.value.shape))
            b._accumulate(_unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

        return Tensor._op(a.value / b.value, (a, b), bwd)

    def __rtruediv__(self, other):
        return as_tensor(other).__truediv__(self)

    def __neg__(self):
        a = self

        def bwd(g):
            a._accumulate(-g)

        return Tensor._op(-a.value, (a,), bwd)

    def __getitem__(self, idx):
        a = self

        def bwd(g):
            buf = np.zeros_like(a.value)
            np.add.at(buf, idx, g)
            a._accumulate(buf)

        return Tensor._op(a.value[idx], (a,), bwd)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def value_of(x) -> Array:
    """Underlying ndarray of either a Tensor or an array-like."""
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor) -> None:
    """Propagate gradients from a scalar loss to all requires_grad leaves."""
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects a Tensor")
    if loss.value.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.value.shape}")
    order = _toposort(loss)
    loss._accumulate(np.ones_like(loss.value))
    for node in reversed(order):
        if node._backward_fn is not None:
            node._backward_fn(node.grad)


def _toposort(root: Tensor) -> list[Tensor]:
    # iterative DFS; unrolled solver graphs overflow the recursion limit
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


# ---------------------------------------------------------------------------
# generic elementwise functions


def _unary(x, fwd, make_bwd):
    if not isinstance(x, Tensor):
        return fwd(np.asarray(x, dtype=np.float64))
    y = fwd(x.value)
    bwd = make_bwd(x, y)
    return Tensor._op(y, (x,), bwd)


def tanh(x):
    def make(a, y):
        def bwd(g):
            a._accumulate(g * (1.0 - y * y))

        return bwd

    return _unary(x, np.tanh, make)


def exp(x):
    def make(a, y):
        def bwd(g):
            a._accumulate(g * y)

        return bwd

    return _unary(x, np.exp, make)


def sqrt(x):
    def make(a, y):
        def bwd(g):
            a._accumulate(g * (0.5 / y))

        return bwd

    return _unary(x, np.sqrt, make)


def absolute(x):
    def make(a, y):
        sign = np.sign(a.value)

        def bwd(g):
            a._accumulate(g * sign)

        return bwd

    return _unary(x, np.abs, make)


def square(x):
    def make(a, y):
        def bwd(g):
            a._accumulate(g * (2.0 * a.value))

        return bwd

    return _unary(x, np.square, make)


def reciprocal(x):
    def make(a, y):
        def bwd(g):
            a._accumulate(-g * y * y)

        return bwd

    return _unary(x, np.reciprocal, make)


def maximum(a, b):
    """Elementwise max; the gradient at ties goes to the first argument."""
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return np.maximum(np.asarray(a, dtype=np.float64), b)
    ta, tb = as_tensor(a), as_tensor(b)
    mask = ta.value >= tb.value

    def bwd(g):
        ta._accumulate(_unbroadcast(g * mask, ta.value.shape))
        tb._accumulate(_unbroadcast(g * ~mask, tb.value.shape))

    return Tensor._op(np.maximum(ta.value, tb.value), (ta, tb), bwd)


# ---------------------------------------------------------------------------
# shape ops


def concat(parts: Sequence, axis: int = 0):
    if not any(isinstance(p, Tensor) for p in parts):
        return np.concatenate(parts, axis=axis)
    tensors = [as_tensor(p) for p in parts]
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        index = [slice(None)] * g.ndim
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            index[axis] = slice(lo, hi)
            t._accumulate(g[tuple(index)])

    return Tensor._op(
        np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors), bwd
    )


def reshape(x, shape):
    if not isinstance(x, Tensor):
        return np.reshape(x, shape)
    a = x
    old = a.value.shape

    def bwd(g):
        a._accumulate(g.reshape(old))

    return Tensor._op(a.value.reshape(shape), (a,), bwd)


def reduce_sum(x, axis=None, keepdims: bool = False):
    if not isinstance(x, Tensor):
        return np.sum(x, axis=axis, keepdims=keepdims)
    a = x

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.value.shape).copy())

    return Tensor._op(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), bwd)


def reduce_mean(x, axis=None, keepdims: bool = False):
    if not isinstance(x, Tensor):
        return np.mean(x, axis=axis, keepdims=keepdims)
    n = x.value.size if axis is None else np.prod(
        [x.value.shape[i] for i in np.atleast_1d(axis)]
    )
    return reduce_sum(x, axis=axis, keepdims=keepdims) * (1.0 / float(n))


def softmax_rows(x):
    """Softmax along the last axis, max-stabilized; rows sum to one."""

    def _forward(v):
        z = v - v.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    if not isinstance(x, Tensor):
        return _forward(np.asarray(x, dtype=np.float64))
    a = x
    s = _forward(a.value)

    def bwd(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        a._accumulate(s * (g - inner))

    return Tensor._op(s, (a,), bwd)


# ---------------------------------------------------------------------------
# 1-d convolutions

_PAD_MODES = {"circular": "wrap", "replicate": "edge"}


def _padded_windows(x: Array, kernel: int, padding: str) -> tuple[Array, Array]:
    if kernel % 2 != 1:
        raise ValueError(f"kernel size must be odd, got {kernel}")
    if padding not in _PAD_MODES:
        raise ValueError(f"unknown padding mode {padding!r}")
    p = (kernel - 1) // 2
    xp = np.pad(x, ((p, p), (0, 0)), mode=_PAD_MODES[padding]) if p else x
    # shape (L, C_in, K)
    return xp, sliding_window_view(xp, kernel, axis=0)


def _fold_pad_gradient(gpad: Array, length: int, pad: int, padding: str) -> Array:
    """Adjoint of the padding: fold ghost-cell gradients onto interior cells."""
    if pad == 0:
        return gpad
    g = gpad[pad : pad + length].copy()
    if padding == "circular":
        g[length - pad :] += gpad[:pad]
        g[:pad] += gpad[length + pad :]
    else:  # replicate
        g[0] += gpad[:pad].sum(axis=0)
        g[-1] += gpad[length + pad :].sum(axis=0)
    return g


def conv1d(x, w, b, padding: str):
    """Length-preserving 1-d convolution.

    ``x`` is (L, C_in), ``w`` is (K, C_in, C_out) with K odd, ``b`` is
    (C_out,).  Padding of width (K-1)/2 is applied inside the op with the
    requested boundary rule, and the backward pass folds ghost-cell
    gradients back onto the interior (wrapping for circular, accumulating
    onto the edge cells for replicate).
    """
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    K = wv.shape[0]
    xp, win = _padded_windows(xv, K, padding)
    out = np.einsum("lck,kco->lo", win, wv) + bv
    if not (isinstance(x, Tensor) or isinstance(w, Tensor) or isinstance(b, Tensor)):
        return out
    tx, tw, tb = as_tensor(x), as_tensor(w), as_tensor(b)
    L, pad = xv.shape[0], (K - 1) // 2

    def bwd(g):
        if tw.requires_grad:
            tw._accumulate(np.einsum("lck,lo->kco", win, g))
        if tb.requires_grad:
            tb._accumulate(g.sum(axis=0))
        if tx.requires_grad:
            gpad = np.zeros_like(xp)
            for j in range(K):
                gpad[j : j + L] += g @ wv[j].T
            tx._accumulate(_fold_pad_gradient(gpad, L, pad, padding))

    return Tensor._op(out, (tx, tw, tb), bwd)


def conv1d_local(x, w, b, padding: str):
    """Convolution with position-dependent kernels.

    ``w`` is (L, K, C_in, C_out): one kernel per output position, as
    produced by unpacking a per-cell parameter slab.  ``b`` is (L, C_out).
    Contract otherwise identical to :func:`conv1d`.
    """
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    K = wv.shape[1]
    xp, win = _padded_windows(xv, K, padding)
    out = np.einsum("lck,lkco->lo", win, wv) + bv
    if not (isinstance(x, Tensor) or isinstance(w, Tensor) or isinstance(b, Tensor)):
        return out
    tx, tw, tb = as_tensor(x), as_tensor(w), as_tensor(b)
    L, pad = xv.shape[0], (K - 1) // 2

    def bwd(g):
        if tw.requires_grad:
            tw._accumulate(np.einsum("lck,lo->lkco", win, g))
        if tb.requires_grad:
            tb._accumulate(g)
        if tx.requires_grad:
            gwin = np.einsum("lo,lkco->lck", g, wv)
            gpad = np.zeros_like(xp)
            for j in range(K):
                gpad[j : j + L] += gwin[:, :, j]
            tx._accumulate(_fold_pad_gradient(gpad, L, pad, padding))

    return Tensor._op(out, (tx, tw, tb), bwd)


# ---------------------------------------------------------------------------
# optimizer


def adam_step(
    params: dict[str, Array],
    grads: dict[str, Array],
    state: "AdamState",
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> dict[str, Array]:
    """One adaptive-moment update with bias correction; mutates ``state``."""
    state.t += 1
    t = state.t
    new = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name!r}")
        m = state.m[name] = beta1 * state.m.get(name, 0.0) + (1 - beta1) * g
        v = state.v[name] = beta2 * state.v.get(name, 0.0) + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        new[name] = p - lr * mhat / (np.sqrt(vhat) + eps)
    return new


class AdamState:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999):
        self.m: dict[str, Array] = {}
        self.v: dict[str, Array] = {}
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2


class Adam:
    """Adaptive-moment optimizer over a dict of leaf Tensors."""

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = AdamState(beta1, beta2)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, grads: dict[str, Array] | None = None) -> None:
        if grads is None:
            grads = {
                k: (p.grad if p.grad is not None else np.zeros_like(p.value))
                for k, p in self.params.items()
            }
        values = {k: p.value for k, p in self.params.items()}
        updated = adam_step(
            values, grads, self.state, self.lr, self.beta1, self.beta2, self.eps
        )
        for k, p in self.params.items():
            p.value = updated[k]


def global_norm(grads: Iterable[Array]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_gradients(grads: dict[str, Array], max_norm: float) -> dict[str, Array]:
    norm = global_norm(grads.values())
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


# ---------------------------------------------------------------------------
# finite-difference oracle


def finite_difference_gradient(f: Callable[[Array], float], x: Array, h: float = 1e-6) -> Array:
    """Central-difference gradient of a scalar function, one entry at a time.

    Deliberately independent of the tape: used as the oracle that the
    reverse-mode gradients are checked against.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        fp = f(x)
        flat[i] = keep - h
        fm = f(x)
        flat[i] = keep
        gflat[i] = (fp - fm) / (2.0 * h)
    return g
