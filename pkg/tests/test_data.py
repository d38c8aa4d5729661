import numpy as np
import pytest

from lapool_lab.data import (
    Motif,
    MotifTask,
    default_motifs,
    generate_dataset,
    load_dataset,
    motif_nodes,
    save_dataset,
    split_dataset,
)
from lapool_lab.graph import connected_components

TRIANGLE = Motif("triangle", ((0, 1), (1, 2), (2, 0)), (2, 3, 4))


def test_always_planted_motif_sets_label_and_mask():
    task = MotifTask(motifs=(TRIANGLE,), noise=0.0, motif_rate=1.0)
    (g,) = generate_dataset(task, 1)
    assert g.label_vector(1)[0] == 1
    mask = motif_nodes(g, 0)
    assert mask.sum() == 3 and np.array_equal(mask, g.motif_mask)
    # the three marked nodes carry the motif's one-hot types and form a triangle
    idx = np.flatnonzero(mask)
    assert sorted(np.argmax(g.node_features[idx], axis=1)) == [2, 3, 4]
    assert g.adjacency[np.ix_(idx, idx)].sum() == 6


def test_same_seed_same_dataset():
    a = generate_dataset(MotifTask(seed=3), 20)
    b = generate_dataset(MotifTask(seed=3), 20)
    assert all(x.same_as(y) for x, y in zip(a, b))
    c = generate_dataset(MotifTask(seed=4), 20)
    assert not all(x.same_as(y) for x, y in zip(a, c))


def test_density_zero_background():
    task = MotifTask(motifs=(TRIANGLE,), density=0.0, motif_rate=1.0, bridges=(0, 0), connected=False, noise=0.0)
    for g in generate_dataset(task, 10):
        mask = g.motif_mask.astype(bool)
        assert g.adjacency[~mask].sum() == 0
        assert g.adjacency[np.ix_(mask, mask)].sum() == 6


def test_connected_when_requested():
    for g in generate_dataset(MotifTask(), 50):
        assert connected_components(g).max() == 0


def test_positive_rate_over_1000_graphs():
    for rate in (0.3, 0.5):
        graphs = generate_dataset(MotifTask(motif_rate=rate, seed=11), 1000)
        labels = np.array([g.label_vector(3) for g in graphs])
        assert abs(labels.mean() - rate) <= 0.05


def test_every_positive_label_has_an_instance():
    for g in generate_dataset(MotifTask(seed=5), 100):
        y = g.label_vector(3)
        for k in range(3):
            assert (motif_nodes(g, k).sum() > 0) == bool(y[k])
        assert np.array_equal(g.motif_mask, sum(motif_nodes(g, k) for k in range(3)))


def test_edge_types_partition_adjacency():
    for g in generate_dataset(MotifTask(edge_type_count=3), 10):
        assert np.array_equal(g.edge_types.sum(axis=0), g.adjacency)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_min": 2, "n_max": 3, "motifs": (Motif("big", ((0, 1),), (1, 1, 1, 1)),)},
        {"motifs": ()},
        {"n_min": 5, "n_max": 4},
        {"density": 1.5},
        {"motifs": (Motif("bad", ((0, 0),), (1, 1)),)},
        {"motifs": (Motif("bad", ((0, 1),), (1, 9)),)},
        {"bridges": (0, 0)},
    ],
)
def test_infeasible_configs(kwargs):
    with pytest.raises(ValueError):
        generate_dataset(MotifTask(**kwargs), 1)


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        generate_dataset(MotifTask(), 0)


def test_dataset_directory_roundtrip(tmp_path):
    task = MotifTask(seed=2, edge_type_count=2)
    graphs = generate_dataset(task, 6)
    save_dataset(graphs, tmp_path / "d", task)
    loaded, manifest = load_dataset(tmp_path / "d")
    assert manifest["count"] == 6 and manifest["n_labels"] == 3
    assert all(a.same_as(b) for a, b in zip(graphs, loaded))
    assert MotifTask.from_dict(manifest["task"]) == task


def test_split_80_10_10():
    train, valid, test = split_dataset(list(range(500)), seed=0)
    assert (len(train), len(valid), len(test)) == (400, 50, 50)
    assert sorted(train + valid + test) == list(range(500))
    with pytest.raises(ValueError):
        split_dataset(list(range(10)), fractions=(0.5, 0.5, 0.5))


def test_default_motifs_share_types():
    types = [set(m.types) for m in default_motifs()]
    assert types[0] & types[1] and types[0] & types[2]
