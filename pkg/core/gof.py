"""
Refitted quadrilateral goodness-of-fit statistic.

Given a labeling with m clusters, the DCBM is refitted as if the labels were
the truth, and the residual matrix A - Omega_hat is summed around every
4-cycle of distinct nodes. The fitted Omega_hat = U P_hat U' is kept in
factored form (U holds theta_hat_i in column label_i) so no n x n product
is ever formed.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, RefitError, StatisticUndefinedError
from .graph import AdjacencyMatrix, degrees

logger = logging.getLogger(__name__)

DENSE_OMEGA_LIMIT = 2000

GraphLike = Union[AdjacencyMatrix, sp.spmatrix, np.ndarray]


@dataclass(frozen=True)
class RefitModel:
    m: int
    labels: np.ndarray
    theta_hat: np.ndarray
    P_hat: np.ndarray
    g_hat: np.ndarray
    h_hat: np.ndarray

    @property
    def n(self) -> int:
        return len(self.theta_hat)

    @property
    def V_hat(self) -> np.ndarray:
        return np.diag(self.P_hat @ self.g_hat)

    @property
    def H_hat(self) -> np.ndarray:
        return np.diag(self.h_hat)

    @property
    def indicators(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.labels == k) for k in range(self.m)]

    def factor(self) -> np.ndarray:
        """n x m matrix U with Omega_hat = U P_hat U'"""
        U = np.zeros((self.n, self.m))
        U[np.arange(self.n), self.labels] = self.theta_hat
        return U

    def omega_dense(self) -> np.ndarray:
        if self.n > DENSE_OMEGA_LIMIT:
            raise ContractError(
                f"dense Omega_hat is only built for n <= {DENSE_OMEGA_LIMIT}, got n={self.n}"
            )
        U = self.factor()
        return U @ self.P_hat @ U.T


@dataclass(frozen=True)
class GofStatistics:
    m: int
    Q: float
    B: float
    C: int
    psi: float


def _weights(A: GraphLike) -> sp.csr_matrix:
    if isinstance(A, AdjacencyMatrix):
        return A.to_csr(np.float64)
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=np.float64)
    return sp.csr_matrix(np.asarray(A, dtype=np.float64))


def refit(A: GraphLike, labels, m: Optional[int] = None) -> RefitModel:
    """
    Refit (theta, P) treating ``labels`` as the true communities.

    theta_hat_i = d_i / (1_k' A 1_n) * sqrt(1_k' A 1_k) for i in cluster k, and
    P_hat_kl = (1_k' A 1_l) / sqrt((1_k' A 1_k)(1_l' A 1_l)), so P_hat has unit
    diagonal. ``A`` may be a real-valued symmetric matrix; a noise-free Omega
    given with its diagonal reproduces (theta, P) exactly.

    Raises:
        RefitError: A cluster is empty, or has zero total degree or zero
            within-cluster weight.
    """
    labels = np.asarray(labels, dtype=np.int64)
    W = _weights(A)
    n = W.shape[0]
    if labels.shape != (n,):
        raise ContractError(f"labels have shape {labels.shape}, expected ({n},)")
    m = int(labels.max()) + 1 if m is None else m
    if labels.min() < 0 or labels.max() >= m:
        raise ContractError(f"labels must lie in 0..{m - 1}")

    sizes = np.bincount(labels, minlength=m)
    for k in np.flatnonzero(sizes == 0):
        raise RefitError(int(k), "empty cluster")

    Z = sp.csr_matrix((np.ones(n), (np.arange(n), labels)), shape=(n, m))
    d = np.asarray(W.sum(axis=1)).ravel()
    block = np.asarray((Z.T @ W @ Z).todense())
    volume = Z.T @ d
    within = np.diag(block).copy()
    for k in range(m):
        if volume[k] <= 0:
            raise RefitError(k, "no edges leave the cluster (1_k' A 1_n = 0)")
        if within[k] <= 0:
            raise RefitError(k, "no edges inside the cluster (1_k' A 1_k = 0)")

    theta_hat = d / volume[labels] * np.sqrt(within[labels])
    root = np.sqrt(within)
    P_hat = block / np.outer(root, root)
    P_hat = (P_hat + P_hat.T) / 2.0
    np.fill_diagonal(P_hat, 1.0)

    l1 = theta_hat.sum()
    l2 = np.linalg.norm(theta_hat)
    g_hat = (Z.T @ theta_hat) / l1
    h_hat = np.sqrt(Z.T @ theta_hat ** 2) / l2
    return RefitModel(m=m, labels=labels, theta_hat=theta_hat, P_hat=P_hat,
                      g_hat=g_hat, h_hat=h_hat)


def quadrilateral_count(A: GraphLike) -> int:
    """
    Number C_n of ordered 4-cycles on distinct nodes.

    C_n = tr(A^4) - 2 sum_i d_i^2 + 2|E|, with tr(A^4) = ||A^2||_F^2 taken from
    an exact integer sparse product.
    """
    if isinstance(A, AdjacencyMatrix):
        adjacency = A.to_csr(np.int64)
        d = degrees(A).degrees.astype(np.int64)
        edges = A.edge_count
    else:
        adjacency = sp.csr_matrix(A, dtype=np.int64)
        adjacency.setdiag(0)
        adjacency.eliminate_zeros()
        d = np.asarray(adjacency.sum(axis=1)).ravel()
        edges = int(adjacency.nnz // 2)
    square = adjacency @ adjacency
    trace_fourth = int(np.sum(square.data.astype(np.int64) ** 2))
    return trace_fourth - 2 * int(np.sum(d ** 2)) + 2 * edges


def residual_quadrilateral_sum(A: GraphLike, U: np.ndarray, P: np.ndarray,
                               chunk: int = 256) -> float:
    """
    Sum over ordered 4-cycles of distinct nodes of the products of M_ij around
    the cycle, where M = A - U P U' with zero diagonal.

    Uses Q = tr(M^4) - 2 sum_i ((M^2)_ii)^2 + sum_{i != j} M_ij^4. M^2 is
    produced ``chunk`` columns at a time as A X - U (P (U' X)) + delta * X,
    with delta_i = (U P U')_ii - A_ii restoring the zero diagonal.
    """
    W = _weights(A)
    n = W.shape[0]
    U = np.asarray(U, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    UP = U @ P
    delta = np.einsum("ij,ij->i", UP, U) - W.diagonal()
    columns = W.tocsc()

    trace_fourth = 0.0
    diag_square = 0.0
    fourth_powers = 0.0
    for start in range(0, n, chunk):
        cols = np.arange(start, min(start + chunk, n))
        block = columns[:, cols].toarray() - UP @ U[cols].T
        block[cols, np.arange(len(cols))] = 0.0

        product = W @ block - U @ (P @ (U.T @ block)) + delta[:, None] * block
        trace_fourth += float(np.sum(product ** 2))
        column_norms = np.sum(block ** 2, axis=0)
        diag_square += float(np.sum(column_norms ** 2))
        fourth_powers += float(np.sum(block ** 4))
    return trace_fourth - 2.0 * diag_square + fourth_powers


def q_statistic(A: GraphLike, model: RefitModel, chunk: int = 256) -> float:
    """Refitted quadrilateral statistic Q_n"""
    n = _weights(A).shape[0] if not isinstance(A, AdjacencyMatrix) else A.n
    if model.n != n:
        raise ContractError(f"refit covers {model.n} nodes, graph has {n}")
    return residual_quadrilateral_sum(A, model.factor(), model.P_hat, chunk)


def bias_correction(model: RefitModel) -> float:
    """B_n = 2 ||theta_hat||^4 g' V^-1 (P H^2 P o P H^2 P) V^-1 g"""
    v = model.P_hat @ model.g_hat
    for k in np.flatnonzero(v <= 0):
        raise RefitError(int(k), "V_hat has a zero diagonal entry")
    core = model.P_hat @ np.diag(model.h_hat ** 2) @ model.P_hat
    scaled = model.g_hat / v
    norm4 = np.sum(model.theta_hat ** 2) ** 2
    return float(2.0 * norm4 * scaled @ (core * core) @ scaled)


def psi_statistic(A: GraphLike, labels, C: Optional[int] = None,
                  m: Optional[int] = None) -> GofStatistics:
    """
    psi_n = (Q_n - B_n) / sqrt(8 C_n) for the given labeling.

    ``C`` may be passed in when the caller already counted quadrilaterals.

    Raises:
        StatisticUndefinedError: The graph has no quadrilaterals.
        RefitError: The labeling cannot be refitted.
    """
    C = quadrilateral_count(A) if C is None else int(C)
    if C <= 0:
        raise StatisticUndefinedError("graph has no quadrilaterals; statistic undefined")
    model = refit(A, labels, m)
    Q = q_statistic(A, model)
    B = bias_correction(model)
    psi = (Q - B) / np.sqrt(8.0 * C)
    logger.debug("m=%d: Q=%.6g B=%.6g C=%d psi=%.4f", model.m, Q, B, C, psi)
    return GofStatistics(m=model.m, Q=Q, B=B, C=C, psi=float(psi))
