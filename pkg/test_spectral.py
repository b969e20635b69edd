import numpy as np
import pytest

from core.errors import ContractError, EigenSolverError
from core.spectral import EigenPairs, score_ratio_matrix, top_eigenpairs
from models import EigenConfig
from conftest import random_graph


def dense_oracle(graph, m):
    values, vectors = np.linalg.eigh(graph.to_dense())
    order = np.argsort(-np.abs(values), kind="stable")[:m]
    return values[order], vectors[:, order]


def test_complete_graph_perron_pair(k5):
    pairs = top_eigenpairs(k5, 1)
    assert pairs.lambdas[0] == pytest.approx(4.0)
    assert np.allclose(pairs.vectors[:, 0], 1 / np.sqrt(5))


def test_cycle_spectrum(c4):
    pairs = top_eigenpairs(c4, 3)
    assert pairs.lambdas[0] == pytest.approx(2.0)
    assert pairs.lambdas[1] == pytest.approx(-2.0)
    assert abs(pairs.lambdas[2]) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("method", ["dense", "block"])
def test_matches_dense_oracle(method):
    graph = random_graph(50, 0.3, seed=4)
    config = EigenConfig(method=method, dense_below=0)
    pairs = top_eigenpairs(graph, 4, config=config)
    values, vectors = dense_oracle(graph, 4)

    assert np.allclose(pairs.lambdas, values, atol=1e-6)
    for k in range(4):
        assert abs(abs(vectors[:, k] @ pairs.vectors[:, k]) - 1) < 1e-6
    assert np.allclose(pairs.vectors.T @ pairs.vectors, np.eye(4), atol=1e-8)
    assert np.all(pairs.residuals <= 1e-8 * np.maximum(1, np.abs(pairs.lambdas)) + 1e-12)


def test_block_solver_on_larger_graph():
    graph = random_graph(300, 0.05, seed=9)
    pairs = top_eigenpairs(graph, 5, config=EigenConfig(dense_below=100))
    values, _ = dense_oracle(graph, 5)
    assert np.allclose(pairs.lambdas, values, atol=1e-6)
    assert np.all(np.diff(np.abs(pairs.lambdas)) <= 1e-12)


def test_sign_conventions():
    graph = random_graph(80, 0.15, seed=2)
    pairs = top_eigenpairs(graph, 4)
    assert pairs.vectors[:, 0].sum() > 0
    assert np.all(pairs.vectors[:, 0] >= 0)
    assert pairs.perron_violations == 0
    for k in range(1, 4):
        column = pairs.vectors[:, k]
        assert column[np.argmax(np.abs(column))] > 0


def test_seed_does_not_change_ratios():
    graph = random_graph(250, 0.06, seed=5)
    config = EigenConfig(dense_below=0)
    first = score_ratio_matrix(top_eigenpairs(graph, 3, seed=1, config=config), 3)
    second = score_ratio_matrix(top_eigenpairs(graph, 3, seed=2, config=config), 3)
    assert np.allclose(first.R, second.R, atol=1e-5)


def test_noise_free_omega_spectrum():
    n, K = 200, 2
    rng = np.random.default_rng(0)
    labels = rng.integers(0, K, size=n)
    theta = rng.uniform(0.1, 0.3, size=n)
    P = np.array([[1.0, 0.3], [0.3, 1.0]])
    Z = np.eye(K)[labels]
    omega = (theta[:, None] * Z) @ P @ (theta[:, None] * Z).T

    pairs = top_eigenpairs(omega, K)
    H = np.diag(np.sqrt(Z.T @ theta ** 2) / np.linalg.norm(theta))
    mu = np.linalg.eigvalsh(H @ P @ H)
    mu = mu[np.argsort(-np.abs(mu))]
    assert np.allclose(pairs.lambdas, np.linalg.norm(theta) ** 2 * mu, atol=1e-8)


def test_range_checks(c4):
    with pytest.raises(ContractError):
        top_eigenpairs(c4, 0)
    with pytest.raises(ContractError):
        top_eigenpairs(c4, 4)


def test_non_convergence_reports_residuals():
    graph = random_graph(300, 0.05, seed=1)
    config = EigenConfig(dense_below=0, tol=1e-14, max_iter=2)
    with pytest.raises(EigenSolverError) as info:
        top_eigenpairs(graph, 3, config=config)
    assert len(info.value.residuals) == 3


def test_near_degenerate_flag():
    pairs = EigenPairs(lambdas=np.array([3.0, 1.0]), vectors=np.eye(3)[:, :2],
                       residuals=np.zeros(2), next_abs=1.0)
    assert pairs.near_degenerate
    assert not pairs.head(1).near_degenerate


def make_pairs(vectors):
    vectors = np.asarray(vectors, dtype=float)
    m = vectors.shape[1]
    return EigenPairs(lambdas=np.arange(m, 0, -1, dtype=float), vectors=vectors,
                      residuals=np.zeros(m))


def test_ratio_of_equal_columns_is_one():
    xi = np.array([0.5, 0.3, 0.2, 0.6])
    ratios = score_ratio_matrix(make_pairs(np.column_stack([xi, xi])), 2)
    assert np.allclose(ratios.R, 1.0)


def test_ratio_clipping_and_guard():
    leading = np.array([0.5, 0.01, 0.0, 0.4])
    second = np.array([0.1, 0.9, -0.3, -0.2])
    ratios = score_ratio_matrix(make_pairs(np.column_stack([leading, second])), 2, clip=2.0)
    assert ratios.R[:, 0].tolist() == pytest.approx([0.2, 2.0, -2.0, -0.5])
    assert ratios.guarded == 1
    assert np.all(np.isfinite(ratios.R))


def test_ratio_default_clip_is_log_n():
    leading = np.full(10, 1e-6)
    second = np.linspace(-1, 1, 10)
    ratios = score_ratio_matrix(make_pairs(np.column_stack([leading, second])), 2)
    assert ratios.clip == pytest.approx(np.log(10))
    assert np.max(np.abs(ratios.R)) == pytest.approx(np.log(10))


def test_ratio_needs_two_columns():
    with pytest.raises(ContractError):
        score_ratio_matrix(make_pairs(np.ones((4, 2))), 1)
    with pytest.raises(ContractError):
        score_ratio_matrix(make_pairs(np.ones((4, 2))), 3)


def test_two_block_ratios_split_by_sign():
    n = 200
    labels = np.repeat([0, 1], n // 2)
    P = np.array([[1.0, 0.2], [0.2, 1.0]])
    omega = 0.25 * P[labels][:, labels]
    pairs = top_eigenpairs(omega, 2)
    R = score_ratio_matrix(pairs, 2).R[:, 0]
    assert np.allclose(R[labels == 0], R[0])
    assert np.allclose(R[labels == 1], R[-1])
    assert np.sign(R[0]) == -np.sign(R[-1])
