"""Reverse-mode autodiff over dense 2-D float64 arrays.

Every op builds a new :class:`Tensor` holding its parents and a backward rule.
:func:`backward` orders the recorded graph into a :class:`Tape` (topological
order) and walks it once in reverse.

Broadcasting is limited to a row vector (1, c) or a column vector (n, 1)
against an (n, c) matrix, plus (1, 1) scalars.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "parents", "backward_fn", "kink_margin", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        # longdouble survives so finite differences can run in extended precision
        dtype = np.longdouble if getattr(value, "dtype", None) == np.longdouble else np.float64
        value = np.array(value, dtype=dtype)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        if value.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {value.shape}")
        self.value = value
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(value) if requires_grad else None
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn = None
        # distance to the nearest nondifferentiability of the op that made this tensor
        self.kink_margin = np.inf
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.value)

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_multiply(self, other)
        return elementwise_multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scalar_multiply(self, -1.0)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents: Sequence[Tensor], backward_fn: Callable, margin: float = np.inf) -> Tensor:
    out = Tensor(value)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
        out.kink_margin = margin
    return out


def _broadcast_check(a: Tensor, b: Tensor) -> tuple[int, int]:
    (ra, ca), (rb, cb) = a.shape, b.shape
    rows_ok = ra == rb or ra == 1 or rb == 1
    cols_ok = ca == cb or ca == 1 or cb == 1
    if not (rows_ok and cols_ok):
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}")
    return max(ra, rb), max(ca, cb)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _node(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.value.T.copy(), (a,), lambda g: (g.T,))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b)
    return _node(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def subtract(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b)
    return _node(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def elementwise_multiply(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b)
    av, bv = a.value, b.value
    return _node(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)),
    )


def scalar_multiply(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _node(a.value * c, (a,), lambda g: (g * c,))


def concat_columns(tensors: Sequence) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("nothing to concatenate")
    rows = {t.shape[0] for t in tensors}
    if len(rows) != 1:
        raise ShapeError(f"concat of differing row counts {sorted(rows)}")
    edges = np.cumsum([0] + [t.shape[1] for t in tensors])

    def back(g):
        return tuple(g[:, edges[i] : edges[i + 1]] for i in range(len(tensors)))

    return _node(np.concatenate([t.value for t in tensors], axis=1), tensors, back)


def row_select(a, indices) -> Tensor:
    """Rows of ``a`` at ``indices``; the gradient only reaches the selected rows."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise IndexError(f"row index out of range for {a.shape[0]} rows")

    def back(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return _node(a.value[idx], (a,), back)


def row_sum(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.value.sum(axis=1, keepdims=True), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def column_sum(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.value.sum(axis=0, keepdims=True), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def total_sum(a) -> Tensor:
    return column_sum(row_sum(a))


# ---------------------------------------------------------------- nonlinearities


def relu(a) -> Tensor:
    a = as_tensor(a)
    active = a.value > 0
    margin = float(np.min(np.abs(a.value))) if a.value.size else np.inf
    return _node(np.where(active, a.value, 0.0), (a,), lambda g: (g * active,), margin)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.value)
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),))


def l2_norm_rows(a) -> Tensor:
    a = as_tensor(a)
    norms = np.sqrt(np.sum(a.value**2, axis=1, keepdims=True))
    safe = np.where(norms > 0, norms, 1.0)
    unit = np.where(norms > 0, a.value / safe, 0.0)
    margin = float(norms.min()) if norms.size else np.inf
    return _node(norms, (a,), lambda g: (g * unit,), margin)


def cosine_rows(a, b) -> Tensor:
    """Pairwise cosine similarity between rows of ``a`` (n x d) and ``b`` (m x d).

    A zero row has cosine 0 with everything.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"cosine_rows feature mismatch {a.shape} vs {b.shape}")
    na = np.sqrt(np.sum(a.value**2, axis=1, keepdims=True))
    nb = np.sqrt(np.sum(b.value**2, axis=1, keepdims=True))
    ua = np.where(na > 0, a.value / np.where(na > 0, na, 1.0), 0.0)
    ub = np.where(nb > 0, b.value / np.where(nb > 0, nb, 1.0), 0.0)
    cos = ua @ ub.T
    inv_na = np.where(na > 0, 1.0 / np.where(na > 0, na, 1.0), 0.0)
    inv_nb = np.where(nb > 0, 1.0 / np.where(nb > 0, nb, 1.0), 0.0)

    def back(g):
        gua = g @ ub
        gub = g.T @ ua
        ga = (gua - np.sum(gua * ua, axis=1, keepdims=True) * ua) * inv_na
        gb = (gub - np.sum(gub * ub, axis=1, keepdims=True) * ub) * inv_nb
        return ga, gb

    margin = float(min(na.min(initial=np.inf), nb.min(initial=np.inf)))
    return _node(cos, (a, b), back, margin)


def softmax_rows(a) -> Tensor:
    a = as_tensor(a)
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)
    return _node(s, (a,), lambda g: (s * (g - np.sum(g * s, axis=1, keepdims=True)),))


def sparsemax_forward(z: np.ndarray, mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Row-wise Euclidean projection onto the simplex by sort-and-threshold.

    Entries with ``mask == False`` are excluded from the support (forced to 0);
    a row with nothing allowed comes back all-zero. Returns ``(p, tau, margin)``
    where ``margin`` is the smallest gap between an allowed logit and its row's
    threshold. Ties are ordered by value then index (stable sort).
    """
    z = np.asarray(z, dtype=np.longdouble if getattr(z, "dtype", None) == np.longdouble else np.float64)
    if z.ndim != 2 or z.shape[1] < 1:
        raise ShapeError(f"sparsemax needs rows with at least one entry, got {z.shape}")
    allowed = np.ones(z.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    zz = np.where(allowed, z, -np.inf)
    order = np.argsort(-zz, axis=1, kind="stable")
    zs = np.take_along_axis(zz, order, axis=1)
    k = np.arange(1, z.shape[1] + 1, dtype=z.dtype)
    with np.errstate(invalid="ignore"):
        csum = np.cumsum(zs, axis=1)
        cond = 1.0 + k * zs > csum
    cond &= np.isfinite(zs)
    support = cond.sum(axis=1)
    rows = np.arange(z.shape[0])
    has = support > 0
    mean = np.zeros(z.shape[0], dtype=z.dtype)
    mean[has] = csum[rows[has], support[has] - 1] / support[has]
    inv_k = np.where(has, 1.0 / np.maximum(support, 1).astype(z.dtype), 0.0)
    tau = mean - inv_k
    # (z - mean) + 1/k rather than z - tau: a single-entry support then gives exactly 1
    with np.errstate(invalid="ignore"):
        p = np.where(allowed, np.maximum((z - mean[:, None]) + inv_k[:, None], 0.0), 0.0)
    p[~has] = 0.0
    gaps = np.where(allowed & has[:, None], np.abs(z - tau[:, None]), np.inf)
    margin = float(gaps.min()) if gaps.size else np.inf
    return p, tau, margin


def sparsemax_rows(z, mask: np.ndarray | None = None) -> Tensor:
    z = as_tensor(z)
    p, _, margin = sparsemax_forward(z.value, mask)
    on = p > 0
    count = on.sum(axis=1, keepdims=True)

    def back(g):
        mean = np.where(count > 0, np.sum(g * on, axis=1, keepdims=True) / np.maximum(count, 1), 0.0)
        return (np.where(on, g - mean, 0.0),)

    return _node(p, (z,), back, margin)


# ---------------------------------------------------------------- losses


def mse_loss(pred, target) -> Tensor:
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.value - target.value
    n = diff.size
    return _node(
        np.array([[np.mean(diff**2)]]),
        (pred, target),
        lambda g: (g * 2.0 * diff / n, -g * 2.0 * diff / n),
    )


def sigmoid_cross_entropy_loss(logits, targets) -> Tensor:
    """Mean binary cross entropy of sigmoid(logits) against 0/1 targets."""
    logits, targets = as_tensor(logits), as_tensor(targets)
    if logits.shape != targets.shape:
        raise ShapeError(f"loss shape mismatch {logits.shape} vs {targets.shape}")
    x, y = logits.value, targets.value
    n = x.size
    loss = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    s = _sigmoid(x)
    return _node(np.array([[loss.mean()]]), (logits, targets), lambda g: (g * (s - y) / n, -g * x / n))


# ---------------------------------------------------------------- backward pass


class Tape:
    """Topologically ordered record of every op reachable from an output."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(out, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in reversed(node.parents):
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self):
        return len(self.nodes)

    @property
    def min_kink_margin(self) -> float:
        return min((n.kink_margin for n in self.nodes), default=np.inf)


def backward(loss: Tensor) -> Tape:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every requires-grad leaf."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a 1x1 loss, got {loss.shape}")
    tape = Tape.from_output(loss)
    if not loss.requires_grad:
        return tape
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            node.grad = node.grad + g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
    return tape


def gradients(loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Fresh gradients of ``loss`` w.r.t. ``params`` (zero for unreached ones)."""
    saved = [p.grad for p in params]
    for p in params:
        p.grad = np.zeros_like(p.value)
    backward(loss)
    out = [p.grad for p in params]
    for p, s in zip(params, saved):
        p.grad = s
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


def grad_check_tensors(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    eps: float = 1e-5,
    extended: bool = False,
    coordinates: dict[int, np.ndarray] | None = None,
) -> float:
    """Max relative error between backward() and central differences.

    ``loss_fn`` rebuilds the computation from the current values of ``tensors``,
    which are perturbed in place and restored. With ``extended`` the perturbed
    evaluations run in longdouble, which pushes the roundoff of the difference
    quotient far below the 1e-8 floor of the relative error; the analytic
    gradient is still the float64 one. ``coordinates`` maps a tensor's
    position in ``tensors`` to the flat indices to probe (default: all).
    """
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError(f"eps must lie in [1e-7, 1e-4], got {eps}")
    out = loss_fn()
    if out.shape != (1, 1):
        raise ShapeError(f"grad_check needs a scalar function, got {out.shape}")
    analytic = gradients(out, tensors)
    saved = [t.value for t in tensors]
    if extended:
        for t in tensors:
            t.value = t.value.astype(np.longdouble)
    worst = 0.0
    try:
        for j, (t, ga) in enumerate(zip(tensors, analytic)):
            flat = t.value.reshape(-1)
            probe = np.arange(flat.size) if coordinates is None else np.asarray(coordinates.get(j, []), dtype=np.int64)
            numeric = np.zeros(probe.size, dtype=t.value.dtype)
            for n, i in enumerate(probe):
                orig = flat[i]
                flat[i] = orig + eps
                fp = loss_fn().value[0, 0]
                flat[i] = orig - eps
                fm = loss_fn().value[0, 0]
                flat[i] = orig
                numeric[n] = (fp - fm) / (2 * t.value.dtype.type(eps))
            worst = max(worst, relative_error(ga.reshape(-1)[probe], numeric.astype(np.float64)))
    finally:
        for t, v in zip(tensors, saved):
            t.value = v
    return worst


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-5) -> float:
    """Finite-difference check of a scalar function of one tensor."""
    leaf = Tensor(np.array(as_tensor(x).value, copy=True), requires_grad=True)
    return grad_check_tensors(lambda: f(leaf), [leaf], eps)
