"""Reverse-mode automatic differentiation on a flat tape.

Values are numpy arrays wrapped in :class:`Tensor`.  Operations on tracked
tensors append a node to the innermost active :class:`Tape`; the tape is
topologically ordered by construction, so :func:`backward` is a single reverse
sweep.

The module-level functions (``exp``, ``lgamma``, ``sum`` ...) dispatch on their
argument: plain numbers and arrays go straight to numpy and come back as
arrays, so closed forms written against this module serve both for evaluation
and for differentiation.
"""

from __future__ import annotations

import builtins
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import special_fn

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "grad_check",
    "GradCheckReport",
    "value",
    "exp",
    "log",
    "sqrt",
    "abs",
    "softplus",
    "relu",
    "sigmoid",
    "tanh",
    "lgamma",
    "digamma",
    "trigamma",
    "sum",
    "mean",
    "where",
    "minimum",
    "maximum",
    "clip",
    "logsumexp",
    "matmul",
    "reshape",
    "DERIVATIVES",
]

_TAPES: list[Tape] = []


class Tape:
    """Append-only record of primitive operations."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple, tuple]] = []

    def __enter__(self) -> Tape:
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)


class Tensor:
    """An array value, optionally tracked for differentiation."""

    __array_ufunc__ = None  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, track: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=float)
        self.tracked = track
        self.name = name

    shape = property(lambda self: self.data.shape)
    ndim = property(lambda self: self.data.ndim)
    size = property(lambda self: self.data.size)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}({self.data!r}, tracked={self.tracked})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __len__(self):
        return len(self.data)

    def __add__(self, other):
        return _binary(self, other, np.add, lambda g, a, b: g, lambda g, a, b: g)

    __radd__ = __add__

    def __sub__(self, other):
        return _binary(self, other, np.subtract, lambda g, a, b: g, lambda g, a, b: -g)

    def __rsub__(self, other):
        return _binary(other, self, np.subtract, lambda g, a, b: g, lambda g, a, b: -g)

    def __mul__(self, other):
        return _binary(self, other, np.multiply, lambda g, a, b: g * b, lambda g, a, b: g * a)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _binary(self, other, np.divide, lambda g, a, b: g / b, lambda g, a, b: -g * a / (b * b))

    def __rtruediv__(self, other):
        return _binary(other, self, np.divide, lambda g, a, b: g / b, lambda g, a, b: -g * a / (b * b))

    def __neg__(self):
        return _unary(self, np.negative(self.data), lambda g, x, y: -g)

    def __pow__(self, p):
        if isinstance(p, Tensor):
            raise TypeError("only constant exponents are supported")
        p = float(p)
        return _unary(self, self.data ** p, lambda g, x, y: g * p * x ** (p - 1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        out = self.data[idx]

        def vjp(g, x, y):
            full = np.zeros_like(x)
            np.add.at(full, idx, g)
            return full

        return _unary(self, out, vjp)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    @property
    def T(self):
        return _unary(self, self.data.T, lambda g, x, y: g.T)


def value(x) -> np.ndarray:
    """Underlying array of a Tensor or array-like."""
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=float)


def _recording(*tensors) -> Tape | None:
    if not _TAPES:
        return None
    if builtins.any(isinstance(t, Tensor) and t.tracked for t in tensors):
        return _TAPES[-1]
    return None


def _record(out: np.ndarray, parents: tuple, vjps: tuple) -> Tensor:
    tape = _recording(*parents)
    res = Tensor(out)
    if tape is not None:
        res.tracked = True
        tape.nodes.append((res, parents, vjps))
    return res


def _unary(x: Tensor, out: np.ndarray, vjp) -> Tensor:
    xd = x.data
    return _record(out, (x,), (lambda g, y: vjp(g, xd, y),))


def _binary(a, b, fn, vjp_a, vjp_b) -> Tensor:
    ad, bd = value(a), value(b)
    out = fn(ad, bd)
    return _record(
        out,
        (a, b),
        (lambda g, y: vjp_a(g, ad, bd), lambda g, y: vjp_b(g, ad, bd)),
    )


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to every tracked leaf."""
    if not isinstance(loss, Tensor) or loss.size != 1:
        raise ValueError("backward requires a scalar Tensor loss")
    if not loss.tracked:
        return {}
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced: set[int] = set()
    leaves: dict[int, Tensor] = {id(loss): loss}
    for out, parents, vjps in reversed(tape.nodes):
        produced.add(id(out))
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for p, vjp in zip(parents, vjps):
            if not (isinstance(p, Tensor) and p.tracked):
                continue
            contrib = _unbroadcast(np.asarray(vjp(g, out.data), dtype=float), p.shape)
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + contrib
            else:
                grads[key] = contrib
            leaves.setdefault(key, p)
    return {leaves[k]: g for k, g in grads.items() if k in leaves and k not in produced}


# -- elementwise primitives ---------------------------------------------------

# Derivative rules for the special-function primitives.  Kept in a table so the
# gradient checker's sensitivity can be exercised by swapping an entry.
DERIVATIVES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "lgamma": special_fn.digamma,
    "digamma": special_fn.trigamma,
    "trigamma": special_fn.tetragamma,
}


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def _elementwise(fn, dfn):
    def op(x):
        if not isinstance(x, Tensor):
            return fn(np.asarray(x, dtype=float))
        out = fn(x.data)
        return _unary(x, out, lambda g, xd, y: g * dfn(xd, y))

    return op


exp = _elementwise(np.exp, lambda x, y: y)
log = _elementwise(np.log, lambda x, y: 1.0 / x)
sqrt = _elementwise(np.sqrt, lambda x, y: 0.5 / y)
abs = _elementwise(np.abs, lambda x, y: np.sign(x))
softplus = _elementwise(lambda x: np.logaddexp(0.0, x), lambda x, y: _sigmoid(x))
relu = _elementwise(lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(float))
sigmoid = _elementwise(_sigmoid, lambda x, y: y * (1.0 - y))
tanh = _elementwise(np.tanh, lambda x, y: 1.0 - y * y)
lgamma = _elementwise(lambda x: np.asarray(special_fn.log_gamma(x)),
                      lambda x, y: DERIVATIVES["lgamma"](x))
digamma = _elementwise(lambda x: np.asarray(special_fn.digamma(x)),
                       lambda x, y: DERIVATIVES["digamma"](x))
trigamma = _elementwise(lambda x: np.asarray(special_fn.trigamma(x)),
                        lambda x, y: DERIVATIVES["trigamma"](x))


# -- structural primitives ----------------------------------------------------

def sum(x, axis=None, keepdims=False):
    if not isinstance(x, Tensor):
        return np.sum(np.asarray(x, dtype=float), axis=axis, keepdims=keepdims)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def vjp(g, xd, y):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, xd.shape)

    return _unary(x, out, vjp)


def mean(x, axis=None, keepdims=False):
    n = value(x).size if axis is None else value(x).shape[axis]
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(x, shape):
    if not isinstance(x, Tensor):
        return np.reshape(np.asarray(x, dtype=float), shape)
    return _unary(x, x.data.reshape(shape), lambda g, xd, y: g.reshape(xd.shape))


def where(cond, a, b):
    """Select ``a`` where ``cond`` holds, else ``b``; ``cond`` is constant."""
    cond = np.asarray(cond, dtype=bool)
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return np.where(cond, value(a), value(b))
    return _binary(
        a,
        b,
        lambda x, y: np.where(cond, x, y),
        lambda g, x, y: np.where(cond, g, 0.0),
        lambda g, x, y: np.where(cond, 0.0, g),
    )


def minimum(a, b):
    return where(value(a) <= value(b), a, b)


def maximum(a, b):
    return where(value(a) >= value(b), a, b)


def clip(x, lo, hi):
    xd = value(x)
    inside = (xd >= lo) & (xd <= hi)
    if not isinstance(x, Tensor):
        return np.clip(xd, lo, hi)
    return _unary(x, np.clip(xd, lo, hi), lambda g, xv, y: np.where(inside, g, 0.0))


def logsumexp(x, axis=-1):
    m = np.max(value(x), axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = sum(exp(x - m), axis=axis)
    return log(s) + np.squeeze(m, axis=axis)


def matmul(a, b):
    ad, bd = value(a), value(b)
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return ad @ bd
    return _record(
        ad @ bd,
        (a, b),
        (lambda g, y: g @ bd.T, lambda g, y: ad.T @ g),
    )


# -- gradient checking ----------------------------------------------------------

@dataclass
class GradCheckReport:
    max_deviation: float
    tol: float
    worst_index: tuple | None = None
    autodiff: list[np.ndarray] = field(default_factory=list, repr=False)
    numeric: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tol)


def grad_check(
    fn: Callable[..., Tensor],
    params: Sequence,
    tol: float = 1e-4,
    step: float = 1e-5,
    floor: float = 1e-4,
) -> GradCheckReport:
    """Compare autodiff gradients of scalar ``fn(*params)`` with central differences.

    The deviation of one coordinate is ``|a - n| / max(|a|, |n|, floor)``;
    ``floor`` keeps exactly-zero gradients from turning round-off into a failure.
    """
    arrays = [np.array(p, dtype=float) for p in params]
    leaves = [Tensor(a, track=True) for a in arrays]
    with Tape() as tape:
        out = fn(*leaves)
    if not isinstance(out, Tensor):
        out = Tensor(out)
    grads = backward(tape, out)
    auto = [grads.get(t, np.zeros_like(t.data)) for t in leaves]

    numeric = []
    for i, a in enumerate(arrays):
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            args_p = [x.copy() for x in arrays]
            args_m = [x.copy() for x in arrays]
            args_p[i][idx] += step
            args_m[i][idx] -= step
            fp = float(np.sum(value(fn(*args_p))))
            fm = float(np.sum(value(fn(*args_m))))
            g[idx] = (fp - fm) / (2.0 * step)
        numeric.append(g)

    worst, where_ = 0.0, None
    for i, (a, n) in enumerate(zip(auto, numeric)):
        if a.size == 0:
            continue
        dev = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        j = int(np.argmax(dev))
        if dev.flat[j] > worst or where_ is None:
            worst, where_ = float(dev.flat[j]), (i, np.unravel_index(j, a.shape))
    return GradCheckReport(worst, tol, where_, auto, numeric)
