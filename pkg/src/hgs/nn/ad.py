"""Reverse-mode automatic differentiation over numpy arrays.

Every ``Var`` records its parents and a closure mapping the output cotangent
to parent cotangents. ``backward`` walks the recorded graph in reverse
creation order, so each node is visited once after all its consumers.
Functions in this module accept plain arrays too and then stay in numpy.
"""
from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

_counter = itertools.count()


class NonFiniteError(FloatingPointError):
    """Raised when a loss or gradient contains NaN or infinity."""


class Var:
    __slots__ = ("value", "grad", "parents", "backward_fn", "order")
    __array_priority__ = 1000

    def __init__(self, value, parents: Sequence["Var"] = (), backward_fn=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.order = next(_counter)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Var({self.value!r})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return vsum(self, axis)


def is_var(x) -> bool:
    return isinstance(x, Var)


def value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _node(out, inputs, grads_fn):
    """Build a Var from an output array if any input is a Var.

    ``grads_fn(g)`` returns one cotangent (or None) per input.
    """
    vars_in = [x for x in inputs if isinstance(x, Var)]
    if not vars_in:
        return out
    mask = [isinstance(x, Var) for x in inputs]

    def backward(g):
        gs = grads_fn(g)
        return [gi for gi, m in zip(gs, mask) if m]

    return Var(out, vars_in, backward)


def add(a, b):
    av, bv = value(a), value(b)
    return _node(av + bv, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value(a), value(b)
    return _node(av - bv, (a, b), lambda g: (_unbroadcast(g, av.shape), -_unbroadcast(g, bv.shape)))


def mul(a, b):
    av, bv = value(a), value(b)
    return _node(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b):
    av, bv = value(a), value(b)
    return _node(av / bv, (a, b),
                 lambda g: (_unbroadcast(g / bv, av.shape), _unbroadcast(-g * av / (bv * bv), bv.shape)))


def matmul(a, b):
    av, bv = value(a), value(b)

    def grads(g):
        if av.ndim == 1 and bv.ndim == 2:
            return np.dot(bv, g), np.outer(av, g)
        if av.ndim == 2 and bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return _node(av @ bv, (a, b), grads)


def power(a, p: float):
    av = value(a)
    return _node(av ** p, (a,), lambda g: (g * p * av ** (p - 1),))


def square(a):
    av = value(a)
    return _node(av * av, (a,), lambda g: (2.0 * g * av,))


def relu(a):
    av = value(a)
    # subgradient 0 at exactly 0
    mask = av > 0
    return _node(np.where(mask, av, 0.0), (a,), lambda g: (g * mask,))


def tanh(a):
    out = np.tanh(value(a))
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    av = value(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * av))
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a):
    out = np.exp(value(a))
    return _node(out, (a,), lambda g: (g * out,))


def log(a):
    av = value(a)
    return _node(np.log(av), (a,), lambda g: (g / av,))


def vabs(a):
    av = value(a)
    return _node(np.abs(av), (a,), lambda g: (g * np.sign(av),))


def vsum(a, axis=None):
    av = value(a)

    def grads(g):
        if axis is None:
            return (np.broadcast_to(g, av.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), av.shape).copy(),)

    return _node(av.sum(axis=axis), (a,), grads)


def mean(a, axis=None):
    av = value(a)
    n = av.size if axis is None else av.shape[axis]
    return mul(vsum(a, axis), 1.0 / n)


def getitem(a, idx):
    av = value(a)
    basic = _is_basic_index(idx)

    def grads(g):
        out = np.zeros_like(av)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _node(av[idx], (a,), grads)


def _is_basic_index(idx) -> bool:
    # basic indexing never repeats an element, so plain assignment is safe
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (slice, int, np.integer)) or p is Ellipsis or p is None for p in parts)


def reshape(a, shape):
    av = value(a)
    return _node(av.reshape(shape), (a,), lambda g: (g.reshape(av.shape),))


def transpose(a):
    av = value(a)
    return _node(av.T, (a,), lambda g: (g.T,))


def transpose_axes(a, axes):
    av = value(a)
    inv = np.argsort(axes)
    return _node(np.transpose(av, axes), (a,), lambda g: (np.transpose(g, inv),))


def concat(items: Sequence, axis: int = -1):
    vals = [value(x) for x in items]
    out = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]
    cuts = np.cumsum(sizes)[:-1]

    def grads(g):
        return np.split(g, cuts, axis=axis)

    return _node(out, tuple(items), grads)


def stack(items: Sequence, axis: int = 0):
    vals = [value(x) for x in items]
    out = np.stack(vals, axis=axis)

    def grads(g):
        return [np.take(g, i, axis=axis) for i in range(len(vals))]

    return _node(out, tuple(items), grads)


def custom(out: np.ndarray, inputs: Sequence, backward: Callable[[np.ndarray], Sequence]):
    """Wrap an externally computed value with a user-supplied vector-Jacobian product."""
    return _node(np.asarray(out, dtype=np.float64), tuple(inputs), backward)


def backward(root: Var) -> None:
    """Accumulate d root / d node into ``.grad`` of every ancestor of ``root``."""
    if root.value.size != 1:
        raise ValueError("backward needs a scalar root")
    nodes = {}
    stack = [root]
    while stack:
        v = stack.pop()
        if id(v) in nodes:
            continue
        nodes[id(v)] = v
        stack.extend(p for p in v.parents if id(p) not in nodes)
    for v in nodes.values():
        v.grad = None
    root.grad = np.ones_like(root.value)
    for v in sorted(nodes.values(), key=lambda n: n.order, reverse=True):
        if v.backward_fn is None or v.grad is None:
            continue
        for p, gp in zip(v.parents, v.backward_fn(v.grad)):
            if gp is None:
                continue
            gp = np.asarray(gp, dtype=np.float64).reshape(p.value.shape)
            p.grad = gp.copy() if p.grad is None else p.grad + gp


def value_and_grad(f: Callable[[Var], Var], x: np.ndarray) -> tuple[float, np.ndarray]:
    """Evaluate scalar ``f`` at ``x`` and its gradient with respect to ``x``."""
    leaf = Var(np.array(x, dtype=np.float64, copy=True))
    out = f(leaf)
    if not isinstance(out, Var):
        # f did not touch its argument: constant function
        val = float(np.asarray(out))
        g = np.zeros_like(leaf.value)
    else:
        val = float(out.value.reshape(()))
        backward(out)
        g = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
    if not np.isfinite(val):
        raise NonFiniteError(f"loss is not finite ({val})")
    if not np.all(np.isfinite(g)):
        bad = int(np.count_nonzero(~np.isfinite(g)))
        raise NonFiniteError(f"gradient has {bad} non-finite entries")
    return val, g
