"""Finite-difference certification of every differentiable layer.

Each registered case draws a random input point, builds a scalar loss
(a fixed random projection of the layer output) and compares backward()
against central differences. Points whose tape passes within
``margin_factor * eps`` of a kink (relu at 0, sparsemax support boundary,
zero-norm rows in cosine/norm) are redrawn.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import Graph
from .layers import Dense, EdgeGCLayer, GINLayer, GlobalPool
from .model import ModelConfig, build_model
from .pooling import LaPool, PoolConfig

LAYER_TOL = 1e-5
MODEL_TOL = 1e-4


@dataclass
class CaseResult:
    name: str
    max_error: float
    tolerance: float
    points: int
    redrawn: int
    coordinates: int
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def _random_graph(rng: np.random.Generator, n: int, d: int, p: float = 0.5, edge_types: int = 0) -> Graph:
    while True:
        upper = np.triu(rng.random((n, n)) < p, 1)
        A = (upper | upper.T).astype(np.float64)
        if A.sum(axis=1).min() > 0:
            break
    E = None
    if edge_types:
        E = np.zeros((edge_types, n, n))
        iu, ju = np.nonzero(np.triu(A, 1))
        kinds = rng.integers(edge_types, size=iu.size)
        E[kinds, iu, ju] = E[kinds, ju, iu] = 1.0
    return Graph(node_features=rng.standard_normal((n, d)), adjacency=A, edge_types=E)


def _projected(out: Tensor, W: np.ndarray) -> Tensor:
    return ad.total_sum(ad.elementwise_multiply(out, W))


# each builder returns (loss_fn, tensors to check)
Builder = Callable[[np.random.Generator], tuple[Callable[[], Tensor], list[Tensor]]]


def _case_dense(rng):
    layer = Dense(4, 3, "relu", rng)
    layer.bias.value = rng.standard_normal(layer.bias.shape)
    X = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    W = rng.standard_normal((5, 3))
    return (lambda: _projected(layer(X), W)), [X] + layer.parameters()


def _case_gin(rng):
    g = _random_graph(rng, 5, 3)
    layer = GINLayer(3, 4, hidden=None, rng=rng)
    layer.mlp[0].bias.value = rng.standard_normal((1, 4))
    X = Tensor(g.node_features.copy(), requires_grad=True)
    A = Tensor(g.adjacency * rng.uniform(0.5, 1.5, size=(1, 1)), requires_grad=True)
    W = rng.standard_normal((5, 4))
    return (lambda: _projected(layer(A, X), W)), [X, A] + layer.parameters()


def _case_gin_mlp(rng):
    g = _random_graph(rng, 5, 3)
    layer = GINLayer(3, 3, hidden=4, rng=rng)
    for sub in layer.mlp:
        sub.bias.value = rng.standard_normal(sub.bias.shape)
    X = Tensor(g.node_features.copy(), requires_grad=True)
    W = rng.standard_normal((5, 3))
    return (lambda: _projected(layer(g.adjacency, X), W)), [X] + layer.parameters()


def _case_edge_gc(rng):
    g = _random_graph(rng, 5, 3, edge_types=2)
    layer = EdgeGCLayer(3, 2, 2, rng=rng)
    for conv in layer.convs:
        conv.mlp[0].bias.value = rng.standard_normal((1, 2))
    X = Tensor(g.node_features.copy(), requires_grad=True)
    W = rng.standard_normal((5, 4))
    return (lambda: _projected(layer(list(g.edge_types), X), W)), [X] + layer.parameters()


def _case_gated_pool(rng):
    layer = GlobalPool(4, "gated", rng=rng)
    layer.gate_bias.value = rng.standard_normal((1, 1))
    X = Tensor(rng.standard_normal((6, 4)), requires_grad=True)
    W = rng.standard_normal((1, 4))
    return (lambda: _projected(layer(X), W)), [X] + layer.parameters()


def _case_sparsemax(rng):
    m = int(rng.integers(2, 7))
    Z = Tensor(rng.standard_normal((4, m)), requires_grad=True)
    mask = rng.random((4, m)) < 0.8
    W = rng.standard_normal((4, m))
    return (lambda: _projected(ad.sparsemax_rows(Z, mask), W)), [Z]


def _case_softmax(rng):
    Z = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    W = rng.standard_normal((3, 4))
    return (lambda: _projected(ad.softmax_rows(Z), W)), [Z]


def _case_cosine(rng):
    a = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    W = rng.standard_normal((4, 2))
    return (lambda: _projected(ad.cosine_rows(a, b), W)), [a, b]


def _case_losses(rng):
    x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    t = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    y = (rng.random((2, 3)) < 0.5).astype(np.float64)
    return (lambda: ad.mse_loss(x, t) + ad.sigmoid_cross_entropy_loss(x, y)), [x, t]


def _case_lapool(rng):
    """Full pooling path (affinity + coarsening + M_psi) with the selection frozen."""
    g = _random_graph(rng, 6, 3, p=0.4)
    layer = LaPool(3, 3, PoolConfig(method="dynamic"), rng)
    layer.mpsi.bias.value = rng.standard_normal((1, 3))
    X = Tensor(g.node_features.copy(), requires_grad=True)
    A = Tensor(g.adjacency.copy(), requires_grad=True)
    centroids = layer(g, A, X)[2].centroids
    W1 = rng.standard_normal((len(centroids), len(centroids)))
    W2 = rng.standard_normal((len(centroids), 3))

    def loss():
        A_new, X_new, _ = layer(g, A, X, centroids)
        return _projected(A_new, W1) + _projected(X_new, W2)

    return loss, [X, A] + layer.parameters()


def tiny_model_config(pooling: PoolConfig | None = PoolConfig(), edge_types: int = 0, seed: int = 0) -> ModelConfig:
    return ModelConfig(
        in_dim=3,
        n_labels=2,
        edge_types=edge_types,
        edge_channels=3,
        pre_channels=(4, 4),
        post_channels=(3, 3),
        pooling=pooling,
        dense_channels=4,
        seed=seed,
    )


def _case_model(rng, pooling=PoolConfig(), edge_types=0):
    g = _random_graph(rng, 5, 3, p=0.5, edge_types=edge_types)
    model = build_model(tiny_model_config(pooling, edge_types, seed=int(rng.integers(2**31))))
    for name, p in model.named_parameters().items():
        if name.endswith("bias"):
            p.value = 0.5 * rng.standard_normal(p.shape)
    centroids = model.centroids_for(g)
    y = (rng.random((1, 2)) < 0.5).astype(np.float64)
    return (lambda: ad.sigmoid_cross_entropy_loss(model(g, centroids=centroids).logits, y)), model.parameters()


@dataclass(frozen=True)
class Case:
    builder: Builder
    tolerance: float
    # coordinates probed per point; None probes every coordinate
    probes: int | None = None


# model cases hold ~200 parameters at ~2 ms per forward, so each point probes a
# random subset; over 100 points every parameter tensor is hit many times
MODEL_PROBES = 24

CASES: dict[str, Case] = {
    "dense": Case(_case_dense, LAYER_TOL),
    "gin": Case(_case_gin, LAYER_TOL),
    "gin_two_layer": Case(_case_gin_mlp, LAYER_TOL),
    "edge_gc": Case(_case_edge_gc, LAYER_TOL),
    "gated_pool": Case(_case_gated_pool, LAYER_TOL),
    "sparsemax": Case(_case_sparsemax, LAYER_TOL),
    "softmax": Case(_case_softmax, LAYER_TOL),
    "cosine": Case(_case_cosine, LAYER_TOL),
    "losses": Case(_case_losses, LAYER_TOL),
    "lapool_frozen": Case(_case_lapool, LAYER_TOL),
    "model_lapool": Case(_case_model, MODEL_TOL, MODEL_PROBES),
    "model_edge_lapool": Case(lambda rng: _case_model(rng, PoolConfig(), edge_types=2), MODEL_TOL, MODEL_PROBES),
    "model_gin": Case(lambda rng: _case_model(rng, None), MODEL_TOL, MODEL_PROBES),
}


def _sample_coordinates(rng: np.random.Generator, tensors: list[Tensor], count: int) -> dict[int, np.ndarray]:
    sizes = np.array([t.value.size for t in tensors])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picks = rng.choice(offsets[-1], size=min(count, offsets[-1]), replace=False)
    owner = np.searchsorted(offsets, picks, side="right") - 1
    return {int(j): np.sort(picks[owner == j] - offsets[j]) for j in np.unique(owner)}


def certify(
    name: str,
    points: int = 100,
    eps: float = 1e-5,
    seed: int = 0,
    margin_factor: float = 10.0,
    probes: int | None = -1,
) -> CaseResult:
    """Check ``points`` random points of one case; ``probes=-1`` keeps the case default."""
    case = CASES[name]
    probes = case.probes if probes == -1 else probes
    rng = np.random.default_rng(seed)
    worst, redrawn, done, checked = 0.0, 0, 0, 0
    start = time.perf_counter()
    while done < points:
        loss_fn, tensors = case.builder(rng)
        tape = ad.Tape.from_output(loss_fn())
        if tape.min_kink_margin < margin_factor * eps:
            redrawn += 1
            if redrawn > 20 * points:
                raise RuntimeError(f"{name}: could not find points away from kinks")
            continue
        coords = None if probes is None else _sample_coordinates(rng, tensors, probes)
        checked += sum(t.value.size for t in tensors) if coords is None else sum(v.size for v in coords.values())
        worst = max(worst, ad.grad_check_tensors(loss_fn, tensors, eps, extended=True, coordinates=coords))
        done += 1
    return CaseResult(name, worst, case.tolerance, points, redrawn, checked, time.perf_counter() - start)


def certify_all(points: int = 100, eps: float = 1e-5, seed: int = 0) -> list[CaseResult]:
    return [certify(name, points, eps, seed) for name in CASES]
