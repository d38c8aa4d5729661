"""Graph classifier: [edge-GC] -> GC x2 -> [LaPool] -> GC x2 (skip concat)
-> gated global pool -> dense -> logits."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import Graph
from .layers import Dense, EdgeGCLayer, GINLayer, GlobalPool, Module
from .pooling import ClusterAssignment, LaPool, PoolConfig

CHECKPOINT_FORMAT = "lapool-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    in_dim: int = 6
    n_labels: int = 3
    edge_types: int = 0  # > 0 adds an edge-GC input layer
    edge_channels: int = 16
    pre_channels: tuple[int, int] = (32, 32)
    post_channels: tuple[int, int] = (16, 16)
    gin_hidden: int | None = None  # two-layer M_theta when set
    pooling: PoolConfig | None = field(default_factory=PoolConfig)
    readout: str = "gated"
    dense_channels: int = 32
    seed: int = 0

    def __post_init__(self):
        if len(self.pre_channels) != 2 or len(self.post_channels) != 2:
            raise ValueError("pre_channels and post_channels must each list two GC widths")
        if min(self.pre_channels + self.post_channels) < 1 or self.dense_channels < 1:
            raise ValueError("channel widths must be positive")
        if self.in_dim < 1 or self.n_labels < 1 or self.edge_types < 0:
            raise ValueError("in_dim and n_labels must be positive, edge_types non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pre_channels"] = list(self.pre_channels)
        d["post_channels"] = list(self.post_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        pool = d.get("pooling")
        if isinstance(pool, dict):
            d["pooling"] = PoolConfig(**pool)
        for key in ("pre_channels", "post_channels"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class Forward(NamedTuple):
    logits: Tensor
    assignment: ClusterAssignment | None
    pooled_adjacency: Tensor | None


class Model(Module):
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        width = config.in_dim
        self.edge_gc = None
        if config.edge_types > 0:
            self.edge_gc = EdgeGCLayer(width, config.edge_channels, config.edge_types, config.gin_hidden, rng)
            width = self.edge_gc.output_dim
        c1, c2 = config.pre_channels
        self.gc1 = GINLayer(width, c1, config.gin_hidden, rng)
        self.gc2 = GINLayer(c1, c2, config.gin_hidden, rng)
        self.pool = None if config.pooling is None else LaPool(c2, c2, config.pooling, rng)
        c3, c4 = config.post_channels
        self.gc3 = GINLayer(c2, c3, config.gin_hidden, rng)
        self.gc4 = GINLayer(c3, c4, config.gin_hidden, rng)
        self.readout = GlobalPool(c3 + c4, config.readout, rng=rng)
        self.fc = Dense(self.readout.out_dim, config.dense_channels, "relu", rng)
        self.out = Dense(config.dense_channels, config.n_labels, "linear", rng)

    def __call__(self, g: Graph, x=None, adjacency=None, centroids=None) -> Forward:
        """Logits (1 x n_labels) for ``g``.

        ``x``/``adjacency`` override the graph's features and adjacency (e.g. with
        gradient-tracking tensors); ``centroids`` freezes the pooling selection.
        """
        X = ad.as_tensor(g.node_features if x is None else x)
        A = ad.as_tensor(g.adjacency if adjacency is None else adjacency)
        if X.shape[1] != self.config.in_dim:
            raise ad.ShapeError(f"model expects {self.config.in_dim} features, graph has {X.shape[1]}")
        h = X
        if self.edge_gc is not None:
            if g.edge_types is None or g.edge_types.shape[0] != self.config.edge_types:
                raise ad.ShapeError(f"model expects {self.config.edge_types} edge types")
            # each slice is its binary pattern times A, so gradients w.r.t. A reach every slice
            slices = [ad.elementwise_multiply(A, E) for E in g.edge_types]
            h = self.edge_gc(slices, h)
        h = self.gc2(A, self.gc1(A, h))
        assignment = None
        pooled_A = None
        if self.pool is not None:
            A, h, assignment = self.pool(g, A, h, centroids)
            pooled_A = A
        h3 = self.gc3(A, h)
        h4 = self.gc4(A, h3)
        z = self.readout(ad.concat_columns([h3, h4]))
        return Forward(self.out(self.fc(z)), assignment, pooled_A)

    def centroids_for(self, g: Graph):
        """The pooling selection the model makes on ``g`` (None without pooling)."""
        if self.pool is None:
            return None
        return self(g).assignment.centroids

    def predict_proba(self, g: Graph) -> np.ndarray:
        return ad.sigmoid(self(g).logits).value.reshape(-1)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict) -> None:
        params = self.named_parameters()
        if set(state) != set(params):
            raise KeyError(f"parameter names differ: {sorted(set(state) ^ set(params))}")
        for k, p in params.items():
            v = np.asarray(state[k], dtype=np.float64)
            if v.shape != p.value.shape:
                raise ValueError(f"shape mismatch for {k}: {v.shape} vs {p.value.shape}")
            p.value = v.copy()
            p.zero_grad()


def build_model(config: ModelConfig) -> Model:
    return Model(config)


def save_checkpoint(model: Model, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "params": {
            k: {"shape": list(v.shape), "values": v.reshape(-1).tolist()} for k, v in model.state_dict().items()
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_checkpoint(path) -> Model:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    model = Model(ModelConfig.from_dict(payload["config"]))
    state = {k: np.array(v["values"], dtype=np.float64).reshape(v["shape"]) for k, v in payload["params"].items()}
    model.load_state_dict(state)
    return model
