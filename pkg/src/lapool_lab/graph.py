"""Dense undirected graphs, Laplacians, hop distances and graph JSON I/O."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SYMMETRY_TOL = 1e-9


class GraphValidationError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph with node features X, adjacency A and optional edge-type slices E.

    Arrays are copied and made read-only on construction. Self-loops are
    stripped with a warning.
    """

    node_features: np.ndarray
    adjacency: np.ndarray
    edge_types: np.ndarray | None = None
    node_labels: tuple[str, ...] | None = None
    motif_mask: np.ndarray | None = None
    label: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.node_features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        A = np.array(self.adjacency, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < 1:
            raise GraphValidationError(f"node_features must be n x d with d >= 1, got {X.shape}")
        n = X.shape[0]
        if A.shape != (n, n):
            raise GraphValidationError(f"adjacency shape {A.shape} does not match n={n}")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(X)):
            raise GraphValidationError("non-finite entries in graph arrays")
        if np.any(A < 0):
            raise GraphValidationError("adjacency must be non-negative")
        if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL:
            raise GraphValidationError("adjacency is not symmetric")
        A = 0.5 * (A + A.T)
        if np.any(np.diag(A) != 0):
            warnings.warn("self-loops stripped from adjacency", stacklevel=3)
            np.fill_diagonal(A, 0.0)

        E = self.edge_types
        if E is not None:
            E = np.array(E, dtype=np.float64)
            if E.ndim != 3 or E.shape[1:] != (n, n):
                raise GraphValidationError(f"edge_types must be e x n x n, got {E.shape}")
            if not np.all((E == 0) | (E == 1)):
                raise GraphValidationError("edge_types must be binary")
            for s in E:
                np.fill_diagonal(s, 0.0)
            if np.any(E != np.transpose(E, (0, 2, 1))):
                raise GraphValidationError("edge_types slices must be symmetric")
            if not np.array_equal(E.sum(axis=0), A):
                raise GraphValidationError("edge_types do not sum to the adjacency")

        labels = self.node_labels
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != n:
                raise GraphValidationError("node_labels length differs from n")
        mask = self.motif_mask
        if mask is not None:
            mask = np.asarray(mask, dtype=np.int64).reshape(-1)
            if mask.shape != (n,) or not np.all((mask == 0) | (mask == 1)):
                raise GraphValidationError("motif_mask must be a binary vector of length n")
            mask.setflags(write=False)

        object.__setattr__(self, "node_features", _frozen(X))
        object.__setattr__(self, "adjacency", _frozen(A))
        object.__setattr__(self, "edge_types", None if E is None else _frozen(E))
        object.__setattr__(self, "node_labels", labels)
        object.__setattr__(self, "motif_mask", mask)
        object.__setattr__(self, "label", None if self.label is None else int(self.label))
        # memo for topology-derived arrays (distances, Laplacian powers); safe since arrays are read-only
        object.__setattr__(self, "_derived", {})

    @property
    def n(self) -> int:
        return self.node_features.shape[0]

    @property
    def d(self) -> int:
        return self.node_features.shape[1]

    def label_vector(self, n_labels: int) -> np.ndarray:
        """Multi-label target decoded from the integer bitmask in ``label``."""
        bits = 0 if self.label is None else self.label
        return np.array([(bits >> k) & 1 for k in range(n_labels)], dtype=np.float64)

    def replace(self, **changes) -> "Graph":
        kw = dict(
            node_features=self.node_features,
            adjacency=self.adjacency,
            edge_types=self.edge_types,
            node_labels=self.node_labels,
            motif_mask=self.motif_mask,
            label=self.label,
            meta=dict(self.meta),
        )
        kw.update(changes)
        return Graph(**kw)

    def same_as(self, other: "Graph") -> bool:
        """Field-by-field equality (``meta`` excluded)."""

        def _eq(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(np.asarray(a), np.asarray(b))

        return (
            _eq(self.node_features, other.node_features)
            and _eq(self.adjacency, other.adjacency)
            and _eq(self.edge_types, other.edge_types)
            and self.node_labels == other.node_labels
            and _eq(self.motif_mask, other.motif_mask)
            and self.label == other.label
        )


def _memo(g: Graph, key, compute):
    cache = g._derived
    if key not in cache:
        value = compute()
        value.setflags(write=False)
        cache[key] = value
    return cache[key]


def laplacian(g: Graph) -> np.ndarray:
    A = g.adjacency
    return np.diag(A.sum(axis=1)) - A


def laplacian_power(g: Graph, h: int) -> np.ndarray:
    if int(h) != h or h < 1:
        raise ValueError(f"Laplacian power must be a positive integer, got {h}")

    def compute():
        L = laplacian(g)
        out = L
        for _ in range(int(h) - 1):
            out = out @ L
        return out

    return _memo(g, ("laplacian_power", int(h)), compute)


def smoothness(g: Graph, f) -> float:
    """Quadratic form f^T L f."""
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    if f.shape[0] != g.n:
        raise ValueError(f"signal length {f.shape[0]} does not match n={g.n}")
    return float(f @ laplacian(g) @ f)


def _bfs_distances(adjacency: np.ndarray, sources: np.ndarray) -> np.ndarray:
    n = adjacency.shape[0]
    linked = adjacency > 0
    dist = np.full((len(sources), n), np.inf)
    frontier = np.zeros((len(sources), n), dtype=bool)
    frontier[np.arange(len(sources)), sources] = True
    visited = frontier.copy()
    hops = 0
    while frontier.any():
        dist[frontier] = hops
        hops += 1
        frontier = (frontier.astype(np.int64) @ linked.astype(np.int64) > 0) & ~visited
        visited |= frontier
    return dist


def shortest_paths(g: Graph, sources) -> np.ndarray:
    """Unweighted hop distances, shape (n, len(sources)); unreachable pairs are ``np.inf``."""
    sources = np.asarray(sources, dtype=np.int64).reshape(-1)
    if sources.size == 0:
        raise ValueError("sources must be non-empty")
    if np.any(sources < 0) or np.any(sources >= g.n):
        raise IndexError(f"source index out of range for n={g.n}")
    key = ("hops", tuple(int(s) for s in sources))
    return _memo(g, key, lambda: _bfs_distances(g.adjacency, sources).T.copy())


def check_permutation(p, n: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64).reshape(-1)
    if n is not None and p.shape[0] != n:
        raise ValueError(f"permutation has length {p.shape[0]}, expected {n}")
    if not np.array_equal(np.sort(p), np.arange(p.shape[0])):
        raise ValueError("mapping is not a bijection")
    return p


def inverse_permutation(p) -> np.ndarray:
    p = check_permutation(p)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.shape[0])
    return inv


def permute(g: Graph, p) -> Graph:
    """Reindex so that new node ``i`` is old node ``p[i]``."""
    p = check_permutation(p, g.n)
    E = None if g.edge_types is None else g.edge_types[:, p][:, :, p]
    return g.replace(
        node_features=g.node_features[p],
        adjacency=g.adjacency[np.ix_(p, p)],
        edge_types=E,
        node_labels=None if g.node_labels is None else tuple(g.node_labels[i] for i in p),
        motif_mask=None if g.motif_mask is None else g.motif_mask[p],
    )


def connected_components(g: Graph) -> np.ndarray:
    """Component id per node, numbered in order of first appearance."""
    comp = np.full(g.n, -1, dtype=np.int64)
    nbrs = [np.flatnonzero(row) for row in g.adjacency > 0]
    c = 0
    for s in range(g.n):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = c
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if comp[v] < 0:
                    comp[v] = c
                    stack.append(v)
        c += 1
    return comp


# ---------------------------------------------------------------- JSON I/O


def graph_to_dict(g: Graph) -> dict:
    out = {
        "n": g.n,
        "node_features": g.node_features.tolist(),
        "adjacency": g.adjacency.tolist(),
    }
    if g.edge_types is not None:
        out["edge_types"] = g.edge_types.astype(np.int64).tolist()
    if g.node_labels is not None:
        out["node_labels"] = list(g.node_labels)
    if g.motif_mask is not None:
        out["motif_mask"] = g.motif_mask.tolist()
    if g.label is not None:
        out["label"] = g.label
    return out


_GRAPH_KEYS = {"n", "node_features", "adjacency", "edge_types", "node_labels", "motif_mask", "label"}


def graph_from_dict(data: dict) -> Graph:
    if not isinstance(data, dict):
        raise GraphValidationError("graph JSON must be an object")
    unknown = set(data) - _GRAPH_KEYS
    if unknown:
        raise GraphValidationError(f"unknown graph keys: {sorted(unknown)}")
    for key in ("n", "node_features", "adjacency"):
        if key not in data:
            raise GraphValidationError(f"missing required key {key!r}")
    try:
        X = np.array(data["node_features"], dtype=np.float64)
        A = np.array(data["adjacency"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise GraphValidationError(f"ragged or non-numeric arrays: {exc}") from exc
    if X.ndim != 2 or X.shape[0] != int(data["n"]):
        raise GraphValidationError(f"node_features shape {X.shape} inconsistent with n={data['n']}")
    return Graph(
        node_features=X,
        adjacency=A,
        edge_types=data.get("edge_types"),
        node_labels=data.get("node_labels"),
        motif_mask=data.get("motif_mask"),
        label=data.get("label"),
    )


def dumps_graph(g: Graph) -> str:
    return json.dumps(graph_to_dict(g), sort_keys=True)


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(dumps_graph(g) + "\n")


def load_graph(path) -> Graph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphValidationError(f"malformed graph JSON in {path}: {exc}") from exc
    return graph_from_dict(data)


# ---------------------------------------------------------------- DOT export


def _node_name(g: Graph, i: int) -> str:
    if g.node_labels is not None:
        return f"{i}:{g.node_labels[i]}"
    return str(i)


def pooling_to_dot(g: Graph, centroids, affinity: np.ndarray, pooled_adjacency: np.ndarray) -> str:
    """Original graph with per-node cluster affinities next to the pooled graph.

    Centroids are drawn bold with a double outline; pooled edge width scales
    with the coarsened weight.
    """
    centroids = list(int(c) for c in centroids)
    lines = ["graph lapool {", "  subgraph cluster_original {", '    label="original";']
    for i in range(g.n):
        aff = ",".join(f"{v:.3f}" for v in affinity[i])
        style = 'shape=doublecircle, style=bold' if i in centroids else "shape=circle"
        lines.append(f'    n{i} [label="{_node_name(g, i)}", {style}, affinity="{aff}"];')
    for i, j in zip(*np.triu_indices(g.n, 1)):
        if g.adjacency[i, j] > 0:
            lines.append(f"    n{i} -- n{j};")
    lines += ["  }", "  subgraph cluster_pooled {", '    label="pooled";']
    for c_idx, c in enumerate(centroids):
        lines.append(f'    p{c_idx} [label="c{c_idx} (node {c})", shape=box, style=bold];')
    m = len(centroids)
    top = float(np.max(pooled_adjacency)) if m > 1 else 0.0
    for i, j in zip(*np.triu_indices(m, 1)):
        w = float(pooled_adjacency[i, j])
        if w > 0:
            width = 0.5 + 4.0 * w / top if top > 0 else 1.0
            lines.append(f'    p{i} -- p{j} [penwidth={width:.3f}, label="{w:.3f}"];')
    lines += ["  }", "}"]
    return "\n".join(lines) + "\n"


def importance_to_dot(g: Graph, importance) -> str:
    """Nodes shaded by importance (darker is more important)."""
    imp = np.asarray(importance, dtype=np.float64)
    top = float(imp.max()) if imp.size and imp.max() > 0 else 1.0
    lines = ["graph importance {", "  node [style=filled];"]
    for i in range(g.n):
        level = imp[i] / top
        grey = int(round(255 * (1.0 - 0.8 * level)))
        colour = f"#{grey:02x}{grey:02x}ff"
        extra = ", penwidth=3" if g.motif_mask is not None and g.motif_mask[i] else ""
        lines.append(
            f'  n{i} [label="{_node_name(g, i)}", fillcolor="{colour}", importance="{imp[i]:.6g}"{extra}];'
        )
    for i, j in zip(*np.triu_indices(g.n, 1)):
        if g.adjacency[i, j] > 0:
            lines.append(f"  n{i} -- n{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"
