import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lapool_lab.graph import Graph

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def path_graph(n, X=None):
    A = np.zeros((n, n))
    i = np.arange(n - 1)
    A[i, i + 1] = A[i + 1, i] = 1.0
    return Graph(node_features=np.zeros((n, 1)) if X is None else np.asarray(X, float), adjacency=A)


def two_edges(X=None):
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = A[2, 3] = A[3, 2] = 1.0
    return Graph(node_features=np.zeros((4, 1)) if X is None else np.asarray(X, float), adjacency=A)


def random_graph(rng, n, d=2, p=0.4, edge_types=0):
    upper = np.triu(rng.random((n, n)) < p, 1)
    A = (upper | upper.T).astype(float)
    E = None
    if edge_types:
        E = np.zeros((edge_types, n, n))
        iu, ju = np.nonzero(np.triu(A, 1))
        kinds = rng.integers(edge_types, size=iu.size)
        E[kinds, iu, ju] = E[kinds, ju, iu] = 1.0
    return Graph(node_features=rng.standard_normal((n, d)), adjacency=A, edge_types=E)


@st.composite
def graphs(draw, min_n=1, max_n=8, d=2, edge_types=0):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.sampled_from([0.0, 0.2, 0.4, 0.7, 1.0]))
    return random_graph(np.random.default_rng(seed), n, d, p, edge_types)


@st.composite
def permutations(draw, n):
    return np.array(draw(st.permutations(list(range(n)))), dtype=np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``criterion N: PASS/FAIL`` line; all lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
