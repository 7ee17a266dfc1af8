"""Reverse-mode differentiation tape over float64 numpy arrays.

A ``Var`` wraps an ndarray and records, per op, a closure that maps the
upstream gradient to gradients for each parent. ``Var.backward`` replays the
graph in reverse topological order and accumulates into ``Var.grad``. The
op set is intentionally small: exactly what the model forward needs, all in
double precision. There is no broadcasting beyond row-wise bias addition.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionError

Array = np.ndarray


def as_f64(x) -> Array:
    a = np.asarray(x, dtype=np.float64)
    return a


class Var:
    """Node in the computation graph; ``value`` is a float64 ndarray."""

    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(
        self,
        value,
        parents: Sequence["Var"] = (),
        vjp: Callable[[Array], tuple[Array | None, ...]] | None = None,
    ):
        self.value = as_f64(value)
        self.grad: Array | None = None
        self._parents = tuple(parents)
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def backward(self) -> None:
        """Accumulate dself/dleaf into every reachable node's ``grad``."""
        topo: list[Var] = []
        seen: set[int] = set()
        stack: list[tuple[Var, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            parent_grads = node._vjp(node.grad)
            for parent, g in zip(node._parents, parent_grads):
                if g is None:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.value)
                parent.grad += g

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "Var") -> "Var":
        return add(self, other)

    def __sub__(self, other: "Var") -> "Var":
        return add(self, scale(other, -1.0))

    def __mul__(self, other: "Var") -> "Var":
        return mul(self, other)


def constant(x) -> Var:
    return Var(x)


def _same_shape(a: Var, b: Var, op: str) -> None:
    if a.value.shape != b.value.shape:
        raise DimensionError(f"{op}: shapes {a.value.shape} and {b.value.shape} differ")


def add(a: Var, b: Var) -> Var:
    _same_shape(a, b, "add")
    return Var(a.value + b.value, (a, b), lambda g: (g, g))


def add_rowvec(x: Var, b: Var) -> Var:
    """Broadcast a length-m row vector over the rows of an n-by-m matrix."""
    if x.value.ndim != 2 or b.value.shape != (x.value.shape[1],):
        raise DimensionError(
            f"add_rowvec: matrix {x.value.shape} incompatible with vector {b.value.shape}"
        )
    return Var(x.value + b.value, (x, b), lambda g: (g, g.sum(axis=0)))


def mul(a: Var, b: Var) -> Var:
    _same_shape(a, b, "mul")
    return Var(a.value * b.value, (a, b), lambda g: (g * b.value, g * a.value))


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return Var(a.value * c, (a,), lambda g: (g * c,))


def matmul(a: Var, b: Var) -> Var:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise DimensionError(
            f"matmul: shapes {a.value.shape} and {b.value.shape} do not conform"
        )
    return Var(
        a.value @ b.value,
        (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
    )


def transpose(a: Var) -> Var:
    return Var(a.value.T, (a,), lambda g: (g.T,))


def relu(a: Var) -> Var:
    mask = a.value > 0.0
    return Var(a.value * mask, (a,), lambda g: (g * mask,))


def sigmoid(a: Var) -> Var:
    with np.errstate(over="ignore"):  # exp overflow saturates cleanly to 0
        y = 1.0 / (1.0 + np.exp(-a.value))
    return Var(y, (a,), lambda g: (g * y * (1.0 - y),))


def log(a: Var) -> Var:
    return Var(np.log(a.value), (a,), lambda g: (g / a.value,))


def clip(a: Var, lo: float, hi: float) -> Var:
    """Clamp values; gradient is identity inside the band, zero outside."""
    inside = (a.value >= lo) & (a.value <= hi)
    return Var(np.clip(a.value, lo, hi), (a,), lambda g: (g * inside,))


def softmax_rows(a: Var) -> Var:
    """Row-wise stable softmax of a 2-D array."""
    if a.value.ndim != 2 or a.value.shape[1] == 0:
        raise DimensionError(f"softmax_rows: need nonempty 2-D input, got {a.value.shape}")
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g: Array):
        dot = (g * y).sum(axis=1, keepdims=True)
        return ((g - dot) * y,)

    return Var(y, (a,), vjp)


def mean_rows(a: Var) -> Var:
    """Mean over axis 0 of a 2-D array, keeping a 1-by-m row shape."""
    n = a.value.shape[0]
    if n == 0:
        raise DimensionError("mean_rows: empty matrix")
    out = a.value.mean(axis=0, keepdims=True)
    return Var(out, (a,), lambda g: (np.repeat(g / n, n, axis=0),))


def mean_all(a: Var) -> Var:
    n = a.value.size
    return Var(
        np.asarray(a.value.mean()),
        (a,),
        lambda g: (np.full_like(a.value, float(g) / n),),
    )


def sum_all(a: Var) -> Var:
    return Var(np.asarray(a.value.sum()), (a,), lambda g: (np.full_like(a.value, float(g)),))


def concat_rows(parts: Sequence[Var]) -> Var:
    parts = [p for p in parts]
    if not parts:
        raise DimensionError("concat_rows: no blocks")
    widths = {p.value.shape[1] for p in parts}
    if len(widths) != 1:
        raise DimensionError(f"concat_rows: column counts differ: {sorted(widths)}")
    sizes = [p.value.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g: Array):
        return tuple(g[offsets[i] : offsets[i + 1]] for i in range(len(parts)))

    return Var(np.concatenate([p.value for p in parts], axis=0), parts, vjp)


def take_row(a: Var, i: int) -> Var:
    """Select row ``i`` as a 1-by-m matrix."""

    def vjp(g: Array):
        out = np.zeros_like(a.value)
        out[i] = g[0]
        return (out,)

    return Var(a.value[i : i + 1], (a,), vjp)


def mean_of(parts: Sequence[Var]) -> Var:
    """Elementwise mean of same-shaped Vars."""
    total = parts[0]
    for p in parts[1:]:
        total = add(total, p)
    return scale(total, 1.0 / len(parts))
