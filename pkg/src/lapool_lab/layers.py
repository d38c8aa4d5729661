"""GIN / edge-typed convolutions, dense and global pooling layers, and the
parameter-free permutation-invariant embedding used by the reconstruction loss."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import Graph

ACTIVATIONS = ("relu", "linear", "sigmoid")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def activate(x: Tensor, activation: str) -> Tensor:
    if activation == "relu":
        return ad.relu(x)
    if activation == "sigmoid":
        return ad.sigmoid(x)
    if activation == "linear":
        return x
    raise ValueError(f"unknown activation {activation!r}")


class Module:
    """Holds named parameter tensors and child modules."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[prefix + name] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{prefix}{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{prefix}{name}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, activation: str = "relu", rng=None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.in_dim, self.out_dim, self.activation = in_dim, out_dim, activation
        self.weight = Tensor(glorot(rng, in_dim, out_dim), requires_grad=True)
        self.bias = Tensor(np.zeros((1, out_dim)), requires_grad=True)

    def __call__(self, x) -> Tensor:
        x = ad.as_tensor(x)
        if x.shape[1] != self.in_dim:
            raise ad.ShapeError(f"Dense expects {self.in_dim} columns, got {x.shape[1]}")
        return activate(x @ self.weight + self.bias, self.activation)


class GINLayer(Module):
    """x_i <- M(x_i + sum_j A_ij x_j).

    M is one dense+relu layer, or two when ``hidden`` is given.
    """

    def __init__(self, in_dim: int, out_dim: int, hidden: int | None = None, rng=None):
        self.in_dim, self.out_dim, self.hidden = in_dim, out_dim, hidden
        if hidden is None:
            self.mlp = [Dense(in_dim, out_dim, "relu", rng)]
        else:
            self.mlp = [Dense(in_dim, hidden, "relu", rng), Dense(hidden, out_dim, "relu", rng)]

    def aggregate(self, A, X) -> Tensor:
        A, X = ad.as_tensor(A), ad.as_tensor(X)
        n = X.shape[0]
        if A.shape != (n, n):
            raise ad.ShapeError(f"adjacency {A.shape} does not match {n} nodes")
        return X + A @ X

    def __call__(self, A, X) -> Tensor:
        h = self.aggregate(A, X)
        for layer in self.mlp:
            h = layer(h)
        return h


class EdgeGCLayer(Module):
    """One GIN sublayer per edge type, outputs concatenated along features."""

    def __init__(self, in_dim: int, out_dim: int, n_types: int, hidden: int | None = None, rng=None):
        if n_types < 1:
            raise ValueError("need at least one edge type")
        self.in_dim, self.out_dim, self.n_types = in_dim, out_dim, n_types
        self.convs = [GINLayer(in_dim, out_dim, hidden, rng) for _ in range(n_types)]

    def __call__(self, slices: Sequence, X) -> Tensor:
        if len(slices) != self.n_types:
            raise ad.ShapeError(f"expected {self.n_types} edge slices, got {len(slices)}")
        shapes = {ad.as_tensor(E).shape for E in slices}
        if len(shapes) != 1:
            raise ad.ShapeError(f"inconsistent edge slice shapes {sorted(shapes)}")
        return ad.concat_columns([conv(E, X) for conv, E in zip(self.convs, slices)])

    @property
    def output_dim(self) -> int:
        return self.n_types * self.out_dim


class GlobalPool(Module):
    """Graph readout: column sums, or sum_i sigmoid(x_i w_g + b_g) * (x_i W_h)."""

    def __init__(self, in_dim: int, mode: str = "gated", out_dim: int | None = None, rng=None):
        if mode not in ("sum", "gated"):
            raise ValueError(f"unknown global pooling mode {mode!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.mode = mode
        self.in_dim = in_dim
        self.out_dim = in_dim if mode == "sum" or out_dim is None else out_dim
        if mode == "gated":
            self.gate_weight = Tensor(glorot(rng, in_dim, 1), requires_grad=True)
            self.gate_bias = Tensor(np.zeros((1, 1)), requires_grad=True)
            self.value_weight = Tensor(glorot(rng, in_dim, self.out_dim), requires_grad=True)

    def __call__(self, X) -> Tensor:
        X = ad.as_tensor(X)
        if X.shape[0] < 1:
            raise ValueError("global pooling of an empty graph")
        if self.mode == "sum":
            return ad.column_sum(X)
        gate = ad.sigmoid(X @ self.gate_weight + self.gate_bias)
        return ad.column_sum(gate * (X @ self.value_weight))


# ---------------------------------------------------------------- permutation-invariant embedding


def _neighbour_sum(A: np.ndarray, h: np.ndarray) -> np.ndarray:
    # Sorting the per-node products fixes the summation order, so the result is
    # bitwise independent of node ordering.
    prods = A[:, :, None] * h[None, :, :]
    return np.sort(prods, axis=1).sum(axis=1)


def perm_invariant_embedding(g: Graph, rounds: int = 3, edge_aware: bool = False) -> np.ndarray:
    """Unit-weight GIN rounds h <- h + A h, blocks concatenated, rows sorted.

    With ``edge_aware`` each round aggregates every edge-type slice separately
    and concatenates the results, so the width grows by a factor of e per round.
    """
    if rounds < 1:
        raise ValueError("need at least one round")
    if edge_aware and g.edge_types is None:
        raise ValueError("edge-aware embedding needs edge_types")
    slices = list(g.edge_types) if edge_aware else [g.adjacency]
    h = g.node_features
    blocks = [h]
    for _ in range(rounds):
        h = np.concatenate([h + _neighbour_sum(E, h) for E in slices], axis=1)
        blocks.append(h)
    emb = np.concatenate(blocks, axis=1)
    order = np.lexsort(emb.T[::-1])
    return emb[order]


def _pad(g: Graph, n: int) -> Graph:
    extra = n - g.n
    if extra <= 0:
        return g
    X = np.vstack([g.node_features, np.zeros((extra, g.d))])
    A = np.zeros((n, n))
    A[: g.n, : g.n] = g.adjacency
    E = None
    if g.edge_types is not None:
        E = np.zeros((g.edge_types.shape[0], n, n))
        E[:, : g.n, : g.n] = g.edge_types
    return Graph(node_features=X, adjacency=A, edge_types=E)


def reconstruction_loss(g: Graph, g_rec: Graph, rounds: int = 3, edge_aware: bool | None = None) -> float:
    """Mean over sorted rows of the squared embedding difference.

    The smaller graph is padded with isolated zero-feature nodes. ``edge_aware``
    defaults to True when both graphs carry edge types.
    """
    if g.d != g_rec.d:
        raise ValueError(f"feature widths differ: {g.d} vs {g_rec.d}")
    if edge_aware is None:
        edge_aware = g.edge_types is not None and g_rec.edge_types is not None
    n = max(g.n, g_rec.n)
    a = perm_invariant_embedding(_pad(g, n), rounds, edge_aware)
    b = perm_invariant_embedding(_pad(g_rec, n), rounds, edge_aware)
    return float(np.sum((a - b) ** 2) / n)
