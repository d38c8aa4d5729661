"""Laplacian pooling: signal variation, centroid selection, distance-regularized
sparsemax assignment and coarsening.

Gradients flow through the affinity values and the selected centroid features,
never through the discrete choice of centroids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import Graph, laplacian_power, shortest_paths
from .layers import Dense, Module

BETA_MODES = ("distance", "hop_mask", "off")


@dataclass(frozen=True)
class PoolConfig:
    method: str = "dynamic"  # "dynamic" | "topk"
    k: int | None = None
    h: int = 1  # Laplacian power for the signal variation
    beta_mode: str = "distance"
    hop: int = 1  # radius for beta_mode="hop_mask"
    zero_diagonal: bool = True

    def __post_init__(self):
        if self.method not in ("dynamic", "topk"):
            raise ValueError(f"unknown centroid selection method {self.method!r}")
        if self.method == "topk" and (self.k is None or self.k < 1):
            raise ValueError("topk selection needs k >= 1")
        if self.beta_mode not in BETA_MODES:
            raise ValueError(f"unknown beta_mode {self.beta_mode!r}")
        if self.h < 1 or self.hop < 1:
            raise ValueError("h and hop must be >= 1")


@dataclass
class ClusterAssignment:
    centroids: np.ndarray
    affinity: np.ndarray
    method: str
    beta_mode: str
    signal: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.centroids)

    def to_dict(self) -> dict:
        return {
            "centroids": [int(c) for c in self.centroids],
            "affinity": self.affinity.tolist(),
            "method": self.method,
            "beta_mode": self.beta_mode,
            "signal_variation": None if self.signal is None else self.signal.tolist(),
        }


def _values(X) -> np.ndarray:
    return X.value if isinstance(X, Tensor) else np.asarray(X, dtype=np.float64)


def signal_variation(g: Graph, X, h: int = 1) -> np.ndarray:
    """Row norms of L^h X."""
    X = _values(X)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != g.n:
        raise ValueError(f"features have {X.shape[0]} rows, graph has {g.n} nodes")
    return np.linalg.norm(laplacian_power(g, h) @ X, axis=1)


def select_centroids_topk(S, k: int) -> np.ndarray:
    """Indices of the k largest entries of S (smaller index wins ties), ascending."""
    S = np.asarray(S, dtype=np.float64).reshape(-1)
    if not 1 <= k <= S.size:
        raise ValueError(f"k={k} out of range for {S.size} nodes")
    order = np.lexsort((np.arange(S.size), -S))
    return np.sort(order[:k])


def select_centroids_dynamic(g: Graph, S) -> np.ndarray:
    """Nodes with s_i - A_ij s_j > 0 for every j; argmax of S if none qualifies."""
    S = np.asarray(S, dtype=np.float64).reshape(-1)
    if S.size != g.n:
        raise ValueError(f"signal has {S.size} entries, graph has {g.n} nodes")
    keep = np.all(S[:, None] - g.adjacency * S[None, :] > 0, axis=1)
    chosen = np.flatnonzero(keep)
    if chosen.size == 0:
        chosen = np.array([int(np.argmax(S))])
    return chosen


def distance_weights(g: Graph, centroids, mode: str = "distance", hop: int = 1) -> np.ndarray:
    """n x m follower-to-centroid weights.

    ``distance``: 1/d(v_i, c_j), 0 where unreachable. ``hop_mask``: 1 iff
    d <= hop. ``off``: all ones. Centroid rows are overridden downstream.
    """
    centroids = np.asarray(centroids, dtype=np.int64).reshape(-1)
    if centroids.size == 0:
        raise ValueError("no centroids")
    if mode == "off":
        return np.ones((g.n, centroids.size))
    dist = shortest_paths(g, centroids)
    if mode == "hop_mask":
        return (dist <= hop).astype(np.float64)
    if mode == "distance":
        beta = np.zeros_like(dist)
        reach = np.isfinite(dist) & (dist > 0)
        beta[reach] = 1.0 / dist[reach]
        return beta
    raise ValueError(f"unknown beta mode {mode!r}")


def assign_clusters(X, centroids, beta: np.ndarray, scale_logits: bool = True) -> Tensor:
    """Affinity matrix C (n x m) as a differentiable tensor.

    Centroid rows are one-hot on their own column. Follower rows are
    sparsemax over the centroids with nonzero ``beta`` of beta * cos(x_i, x_c)
    (or the bare cosine when ``scale_logits`` is False, as for hop masks).
    Followers with no admissible centroid get an all-zero row.
    """
    X = ad.as_tensor(X)
    centroids = np.asarray(centroids, dtype=np.int64).reshape(-1)
    if centroids.size == 0:
        raise ValueError("empty centroid list")
    n, m = X.shape[0], centroids.size
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (n, m):
        raise ValueError(f"beta shape {beta.shape} != {(n, m)}")
    cos = ad.cosine_rows(X, ad.row_select(X, centroids))
    logits = ad.elementwise_multiply(cos, beta) if scale_logits else cos
    allowed = beta > 0
    allowed[centroids] = False
    onehot = np.zeros((n, m))
    onehot[centroids, np.arange(m)] = 1.0
    return ad.sparsemax_rows(logits, allowed) + onehot


def coarsen(A, X, C, mpsi: Module | None = None, zero_diagonal: bool = True) -> tuple[Tensor, Tensor]:
    """A' = C^T A C (diagonal zeroed by default) and X' = M_psi(C^T X)."""
    A, X, C = ad.as_tensor(A), ad.as_tensor(X), ad.as_tensor(C)
    n = X.shape[0]
    if A.shape != (n, n) or C.shape[0] != n:
        raise ad.ShapeError(f"coarsen shapes A{A.shape} X{X.shape} C{C.shape}")
    Ct = ad.transpose(C)
    A_new = Ct @ A @ C
    if zero_diagonal:
        m = C.shape[1]
        A_new = ad.elementwise_multiply(A_new, 1.0 - np.eye(m))
    X_new = Ct @ X
    if mpsi is not None:
        X_new = mpsi(X_new)
    return A_new, X_new


def pooled_graph(A_new: Tensor, X_new: Tensor) -> Graph:
    A = np.array(A_new.value)
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 0.0)
    return Graph(node_features=X_new.value, adjacency=np.maximum(A, 0.0))


class LaPool(Module):
    """Pooling layer: centroid selection, affinity, coarsening with M_psi = dense + relu."""

    def __init__(self, in_dim: int, out_dim: int | None = None, config: PoolConfig | None = None, rng=None):
        self.config = config or PoolConfig()
        self.in_dim = in_dim
        self.out_dim = in_dim if out_dim is None else out_dim
        self.mpsi = Dense(in_dim, self.out_dim, "relu", rng)

    def __call__(self, g: Graph, A, X, centroids=None):
        """Returns ``(A', X', assignment)``; pass ``centroids`` to freeze the selection."""
        return pool(g, A, X, self.config, self.mpsi, centroids)


def select_centroids(g: Graph, S, config: PoolConfig) -> np.ndarray:
    if config.method == "topk":
        return select_centroids_topk(S, min(config.k, g.n))
    return select_centroids_dynamic(g, S)


def pool(g: Graph, A, X, config: PoolConfig, mpsi: Module | None = None, centroids=None):
    """Tensor-level pipeline: variation -> centroids -> beta -> affinity -> coarsening."""
    X = ad.as_tensor(X)
    S = signal_variation(g, X, config.h)
    if centroids is None:
        centroids = select_centroids(g, S, config)
    centroids = np.asarray(centroids, dtype=np.int64)
    beta = distance_weights(g, centroids, config.beta_mode, config.hop)
    C = assign_clusters(X, centroids, beta, scale_logits=config.beta_mode == "distance")
    A_new, X_new = coarsen(A, X, C, mpsi, config.zero_diagonal)
    info = ClusterAssignment(centroids, C.value.copy(), config.method, config.beta_mode, S)
    return A_new, X_new, info


def lapool_layer(g: Graph, X, config: PoolConfig, mpsi: Module | None = None):
    """Pool ``g`` with features ``X``; ``mpsi=None`` means identity.

    Returns the pooled :class:`Graph`, the pooled feature tensor and the assignment.
    """
    A_new, X_new, info = pool(g, ad.as_tensor(g.adjacency), X, config, mpsi)
    return pooled_graph(A_new, X_new), X_new, info
