import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from models import EigenConfig
from .errors import ContractError, EigenSolverError
from .graph import AdjacencyMatrix, is_connected
from .rng import stream

logger = logging.getLogger(__name__)

PERRON_SNAP = 1e-10
DENOMINATOR_GUARD = 1e-12

MatrixLike = Union[AdjacencyMatrix, sp.spmatrix, np.ndarray]


@dataclass(frozen=True)
class EigenPairs:
    """
    Leading eigenpairs of a symmetric matrix, ordered by decreasing |lambda|.

    ``next_abs`` is |lambda_{m+1}| when the solver went one pair deeper, which
    is what the near-degeneracy flag compares against.
    """
    lambdas: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    next_abs: Optional[float] = None
    gap_tol: float = 1e-6
    perron_violations: int = 0

    @property
    def m(self) -> int:
        return len(self.lambdas)

    @property
    def near_degenerate(self) -> bool:
        if self.next_abs is None or self.m == 0:
            return False
        last = abs(self.lambdas[-1])
        return last - self.next_abs <= self.gap_tol * max(1.0, last)

    def head(self, m: int) -> "EigenPairs":
        """First m pairs of a deeper decomposition"""
        if not 1 <= m <= self.m:
            raise ContractError(f"asked for {m} eigenpairs, only {self.m} computed")
        return EigenPairs(
            lambdas=self.lambdas[:m],
            vectors=self.vectors[:, :m],
            residuals=self.residuals[:m],
            next_abs=abs(float(self.lambdas[m])) if m < self.m else self.next_abs,
            gap_tol=self.gap_tol,
            perron_violations=self.perron_violations,
        )


@dataclass(frozen=True)
class RatioMatrix:
    m: int
    R: np.ndarray
    clip: float
    guarded: int = 0


def _as_operator(A: MatrixLike):
    if isinstance(A, AdjacencyMatrix):
        return A.to_csr(np.float64)
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=np.float64)
    matrix = np.asarray(A, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {matrix.shape}")
    return matrix


def _by_magnitude(values: np.ndarray) -> np.ndarray:
    order = np.argsort(-np.abs(values), kind="stable")
    # bipartite graphs: +lambda_1 and -lambda_1 tie, the Perron root goes first
    if len(order) > 1:
        first, second = values[order[0]], values[order[1]]
        if second > first and abs(second) >= abs(first) * (1 - 1e-9):
            order[[0, 1]] = order[[1, 0]]
    return order


def _dense_pairs(matrix, depth: int):
    dense = matrix.toarray() if sp.issparse(matrix) else matrix
    values, vectors = la.eigh(dense)
    order = _by_magnitude(values)[:depth]
    return values[order], vectors[:, order]


def _block_pairs(matrix, m: int, depth: int, tol: float, max_iter: int,
                 oversample: int, seed: int):
    """Subspace iteration with Rayleigh-Ritz; returns the leading ``depth`` Ritz pairs"""
    n = matrix.shape[0]
    width = min(n, max(2 * depth, depth + oversample))
    rng = stream(seed, 0xE16)
    basis, _ = la.qr(rng.standard_normal((n, width)), mode="economic")
    residuals = np.full(depth, np.inf)

    for iteration in range(1, max_iter + 1):
        image = matrix @ basis
        projected = basis.T @ image
        values, rotation = la.eigh((projected + projected.T) / 2.0)
        order = _by_magnitude(values)
        values, rotation = values[order], rotation[:, order]
        ritz = basis @ rotation
        image = image @ rotation

        residuals = np.linalg.norm(image[:, :depth] - ritz[:, :depth] * values[:depth], axis=0)
        bound = tol * np.maximum(1.0, np.abs(values[:m]))
        if np.all(residuals[:m] <= bound):
            logger.debug("block iteration converged after %d sweeps", iteration)
            return values[:depth], ritz[:, :depth], residuals
        basis, _ = la.qr(image, mode="economic")

    raise EigenSolverError(
        f"eigensolver did not converge in {max_iter} iterations", residuals[:m]
    )


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    vectors = vectors.copy()
    if vectors[:, 0].sum() < 0:
        vectors[:, 0] = -vectors[:, 0]
    for k in range(1, vectors.shape[1]):
        if vectors[np.argmax(np.abs(vectors[:, k])), k] < 0:
            vectors[:, k] = -vectors[:, k]
    return vectors


def top_eigenpairs(A: MatrixLike, m: int, tol: Optional[float] = None,
                   max_iter: Optional[int] = None, seed: int = 0,
                   config: Optional[EigenConfig] = None) -> EigenPairs:
    """
    Compute the m leading eigenpairs (by |lambda|) of a symmetric matrix.

    Args:
        A: Adjacency matrix, or any symmetric sparse / dense array (noise-free
            Omega runs use the latter).
        m: Number of pairs, 1 <= m <= n - 1 for graphs.
        tol: Residual bound, each ||A xi - lambda xi|| <= tol * max(1, |lambda|).
        max_iter: Iteration cap of the block solver (10 n if omitted).
        seed: Seed of the random start block.
        config: Solver settings; explicit ``tol`` / ``max_iter`` take precedence.

    Returns:
        EigenPairs with xi_1 summing to a positive value and every later column
        signed so that its largest-magnitude entry is positive.

    Raises:
        ContractError: m is out of range.
        EigenSolverError: No convergence within ``max_iter`` sweeps.
    """
    config = config or EigenConfig()
    tol = config.tol if tol is None else tol
    matrix = _as_operator(A)
    n = matrix.shape[0]
    upper = n - 1 if isinstance(A, AdjacencyMatrix) else n
    if not 1 <= m <= upper:
        raise ContractError(f"m={m} must lie in 1..{upper}")
    if isinstance(A, AdjacencyMatrix) and not is_connected(A):
        logger.warning("eigensolver input is disconnected; the Perron vector is not unique")

    depth = min(n, m + 1)
    width = min(n, max(2 * depth, depth + config.oversample))
    if config.method == "dense" or n < config.dense_below or width >= n:
        values, vectors = _dense_pairs(matrix, depth)
        residuals = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
    else:
        iterations = max_iter or config.max_iter or 10 * n
        values, vectors, residuals = _block_pairs(
            matrix, m, depth, tol, iterations, config.oversample, seed
        )

    vectors = _canonical_signs(vectors)
    leading = vectors[:, 0]
    noise = (leading < 0) & (leading >= -PERRON_SNAP)
    leading[noise] = 0.0
    violations = int(np.sum(leading < -PERRON_SNAP))
    if violations:
        logger.warning("leading eigenvector has %d clearly negative entries", violations)

    pairs = EigenPairs(
        lambdas=values[:m].copy(),
        vectors=vectors[:, :m].copy(),
        residuals=residuals[:m].copy(),
        next_abs=abs(float(values[m])) if depth > m else None,
        gap_tol=config.gap_tol,
        perron_violations=violations,
    )
    if pairs.near_degenerate:
        logger.warning(
            "|lambda_%d| = %.6g is within the gap tolerance of |lambda_%d|",
            m, abs(pairs.lambdas[-1]), m + 1,
        )
    return pairs


def score_ratio_matrix(pairs: EigenPairs, m: int, clip: Optional[float] = None) -> RatioMatrix:
    """
    Entry-wise ratios R(i, k) = xi_{k+1}(i) / xi_1(i), k = 1..m-1, clipped to [-T, T].

    T defaults to log(n). Rows where |xi_1(i)| falls below the denominator guard
    take sign(xi_{k+1}(i)) * T.
    """
    if m < 2:
        raise ContractError("ratio matrix needs m >= 2; m = 1 uses the all-ones labeling")
    if pairs.m < m:
        raise ContractError(f"need {m} eigenvectors, got {pairs.m}")
    n = pairs.vectors.shape[0]
    threshold = float(np.log(n)) if clip is None else float(clip)

    leading = pairs.vectors[:, 0]
    others = pairs.vectors[:, 1:m]
    tiny = np.abs(leading) < DENOMINATOR_GUARD
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = others / np.where(tiny, 1.0, leading)[:, None]
    ratios[tiny] = np.sign(others[tiny]) * threshold
    ratios = np.clip(ratios, -threshold, threshold)
    return RatioMatrix(m=m, R=ratios, clip=threshold, guarded=int(tiny.sum()))
