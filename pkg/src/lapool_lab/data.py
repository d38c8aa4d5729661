"""Synthetic planted-motif graphs for multi-label substructure prediction.

Each sample is an Erdos-Renyi background whose nodes take "background" types,
with small template motifs spliced in through bridge edges. Label bit k is set
iff motif k was planted; ``node_labels`` records which motif each node came
from (``"bg"`` or ``"m<k>"``), ``motif_mask`` their union.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import Graph, connected_components, graph_from_dict, graph_to_dict


@dataclass(frozen=True)
class Motif:
    name: str
    edges: tuple[tuple[int, int], ...]
    types: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.types)


def default_motifs() -> tuple[Motif, ...]:
    # Types are shared across motifs so that features alone do not identify them.
    return (
        Motif("triangle", ((0, 1), (1, 2), (2, 0)), (2, 3, 4)),
        Motif("square", ((0, 1), (1, 2), (2, 3), (3, 0)), (2, 3, 2, 3)),
        Motif("star", ((0, 1), (0, 2), (0, 3)), (4, 5, 5, 5)),
    )


@dataclass(frozen=True)
class MotifTask:
    motifs: tuple[Motif, ...] = field(default_factory=default_motifs)
    n_types: int = 6
    background_types: tuple[int, ...] = (0, 1)
    n_min: int = 8
    n_max: int = 14
    density: float = 0.2
    noise: float = 0.1
    motif_rate: float = 0.5
    bridges: tuple[int, int] = (1, 2)
    connected: bool = True
    edge_type_count: int = 0
    seed: int = 0

    def validate(self) -> None:
        if not self.motifs:
            raise ValueError("motif library is empty")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"bad background size range [{self.n_min}, {self.n_max}]")
        biggest = max(m.size for m in self.motifs)
        if biggest > self.n_max:
            raise ValueError(f"motif of size {biggest} larger than n range max {self.n_max}")
        for m in self.motifs:
            if any(not 0 <= t < self.n_types for t in m.types):
                raise ValueError(f"motif {m.name} uses a type outside [0, {self.n_types})")
            if any(not (0 <= a < m.size and 0 <= b < m.size) or a == b for a, b in m.edges):
                raise ValueError(f"motif {m.name} has an invalid edge")
        if not 0.0 <= self.density <= 1.0 or not 0.0 <= self.motif_rate <= 1.0:
            raise ValueError("density and motif_rate must lie in [0, 1]")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        lo, hi = self.bridges
        if not 0 <= lo <= hi:
            raise ValueError(f"bad bridge range {self.bridges}")
        if self.connected and (self.density == 0 and self.n_min > 1 or lo == 0):
            raise ValueError("connected graphs need positive density and at least one bridge")

    @property
    def n_labels(self) -> int:
        return len(self.motifs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["motifs"] = [{"name": m.name, "edges": [list(e) for e in m.edges], "types": list(m.types)} for m in self.motifs]
        d["background_types"] = list(self.background_types)
        d["bridges"] = list(self.bridges)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MotifTask":
        d = dict(d)
        if "motifs" in d:
            d["motifs"] = tuple(
                Motif(m["name"], tuple(tuple(e) for e in m["edges"]), tuple(m["types"])) for m in d["motifs"]
            )
        for key in ("background_types", "bridges"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _background(task: MotifTask, rng: np.random.Generator, n: int) -> np.ndarray:
    for _ in range(1000):
        upper = np.triu(rng.random((n, n)) < task.density, 1)
        A = (upper | upper.T).astype(np.float64)
        if not task.connected or n == 1:
            return A
        g = Graph(node_features=np.zeros((n, 1)), adjacency=A)
        if connected_components(g).max() == 0:
            return A
    raise ValueError(f"could not draw a connected background with n={n}, density={task.density}")


def generate_graph(task: MotifTask, rng: np.random.Generator) -> Graph:
    n_bg = int(rng.integers(task.n_min, task.n_max + 1))
    A_bg = _background(task, rng, n_bg)
    planted = [k for k in range(task.n_labels) if rng.random() < task.motif_rate]

    n = n_bg + sum(task.motifs[k].size for k in planted)
    A = np.zeros((n, n))
    A[:n_bg, :n_bg] = A_bg
    types = list(rng.choice(task.background_types, size=n_bg))
    origin = ["bg"] * n_bg
    offset = n_bg
    for k in planted:
        motif = task.motifs[k]
        for a, b in motif.edges:
            A[offset + a, offset + b] = A[offset + b, offset + a] = 1.0
        types += list(motif.types)
        origin += [f"m{k}"] * motif.size
        n_bridge = int(rng.integers(task.bridges[0], task.bridges[1] + 1))
        for _ in range(n_bridge):
            u = offset + int(rng.integers(motif.size))
            v = int(rng.integers(n_bg))
            A[u, v] = A[v, u] = 1.0
        offset += motif.size

    X = np.eye(task.n_types)[types]
    if task.noise > 0:
        X = X + task.noise * rng.standard_normal(X.shape)

    E = None
    if task.edge_type_count > 0:
        E = np.zeros((task.edge_type_count, n, n))
        iu, ju = np.nonzero(np.triu(A, 1))
        kinds = rng.integers(task.edge_type_count, size=iu.size)
        E[kinds, iu, ju] = 1.0
        E[kinds, ju, iu] = 1.0

    perm = rng.permutation(n)
    mask = np.array([o != "bg" for o in origin], dtype=np.int64)
    label = sum(1 << k for k in planted)
    return Graph(
        node_features=X[perm],
        adjacency=A[np.ix_(perm, perm)],
        edge_types=None if E is None else E[:, perm][:, :, perm],
        node_labels=tuple(origin[i] for i in perm),
        motif_mask=mask[perm],
        label=label,
    )


def generate_dataset(task: MotifTask, count: int) -> list[Graph]:
    if count < 1:
        raise ValueError("count must be >= 1")
    task.validate()
    rng = np.random.default_rng(task.seed)
    return [generate_graph(task, rng) for _ in range(count)]


def motif_nodes(g: Graph, k: int) -> np.ndarray:
    """Binary mask of the nodes belonging to planted motif ``k``."""
    if g.node_labels is None:
        raise ValueError("graph carries no node labels")
    return np.array([lab == f"m{k}" for lab in g.node_labels], dtype=np.int64)


def split_dataset(graphs: list, seed: int = 0, fractions=(0.8, 0.1, 0.1)) -> tuple[list, list, list]:
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    order = np.random.default_rng(seed).permutation(len(graphs))
    n_train = int(round(fractions[0] * len(graphs)))
    n_valid = int(round(fractions[1] * len(graphs)))
    pick = lambda idx: [graphs[i] for i in idx]
    return (
        pick(order[:n_train]),
        pick(order[n_train : n_train + n_valid]),
        pick(order[n_train + n_valid :]),
    )


# ---------------------------------------------------------------- dataset directory


def save_dataset(graphs: list[Graph], directory, task: MotifTask | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, g in enumerate(graphs):
        name = f"graph_{i:05d}.json"
        (directory / name).write_text(json.dumps(graph_to_dict(g), sort_keys=True) + "\n")
        files.append(name)
    manifest = {
        "format": "lapool-dataset",
        "version": 1,
        "count": len(graphs),
        "n_labels": None if task is None else task.n_labels,
        "motif_names": None if task is None else [m.name for m in task.motifs],
        "task": None if task is None else task.to_dict(),
        "files": files,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_dataset(directory) -> tuple[list[Graph], dict]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text())
    graphs = [graph_from_dict(json.loads((directory / f).read_text())) for f in manifest["files"]]
    return graphs, manifest
