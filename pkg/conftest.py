import os
from pathlib import Path

import numpy as np
import pytest

from core.graph import AdjacencyMatrix

DATA_DIR = Path(os.environ.get("STGOF_DATA_DIR", Path(__file__).parent / "data"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the Monte Carlo acceptance studies")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def edges_graph(n, pairs):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return AdjacencyMatrix.from_edges(n, pairs[:, 0], pairs[:, 1])


def complete_graph(n):
    rows, cols = np.triu_indices(n, k=1)
    return AdjacencyMatrix.from_edges(n, rows, cols)


def cycle_graph(n):
    return edges_graph(n, [(i, (i + 1) % n) for i in range(n)])


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(len(rows)) < p
    return AdjacencyMatrix.from_edges(n, rows[keep], cols[keep])


def planted_graph(seed, n=300, K=2, norm=12.0, b=0.25):
    """DCBM graph with uniform theta scaled to ||theta|| = norm and P = b 11' + (1 - b) I"""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % K
    theta = rng.uniform(2, 3, size=n)
    theta = norm * theta / np.linalg.norm(theta)
    P = np.full((K, K), b) + (1 - b) * np.eye(K)
    omega = np.outer(theta, theta) * P[labels][:, labels]
    rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(len(rows)) < omega[rows, cols]
    return AdjacencyMatrix.from_edges(n, rows[keep], cols[keep]), labels


@pytest.fixture
def c4():
    return cycle_graph(4)


@pytest.fixture
def k5():
    return complete_graph(5)


@pytest.fixture
def path_tree():
    return edges_graph(6, [(0, 1), (1, 2), (2, 3), (1, 4), (4, 5)])


@pytest.fixture
def karate():
    nx = pytest.importorskip("networkx")
    g = nx.karate_club_graph()
    pairs = np.array(sorted((min(u, v), max(u, v)) for u, v in g.edges()))
    return AdjacencyMatrix.from_edges(g.number_of_nodes(), pairs[:, 0], pairs[:, 1])


@pytest.fixture
def karate_file(tmp_path, karate):
    from core.graph import save_edge_list
    path = tmp_path / "karate.txt"
    save_edge_list(karate, path)
    return path


@pytest.fixture
def data_file():
    """Path of a real-data edge list, skipping the test when it is not available"""
    def locate(name):
        path = DATA_DIR / name
        if not path.exists():
            pytest.skip(f"{path} not available")
        return path
    return locate
