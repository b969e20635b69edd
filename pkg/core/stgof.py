"""
Stepwise goodness-of-fit estimation of the number of communities.

For m = 1, 2, ... the graph is clustered into m groups (all-ones labels for
m = 1, SCORE otherwise), the refitted quadrilateral statistic is standardized,
and the first m whose statistic falls below the upper-alpha normal quantile is
returned. The bootstrap variant standardizes Q_n with an empirical null built
from a rank-m fit plus permuted residuals.
"""
import logging
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtri

from models import EstimateReport, StepReport, StgofConfig
from .clustering import kmeans
from .dcbm import sample_adjacency
from .errors import BootstrapError, ClusteringError, RefitError, StatisticUndefinedError
from .gof import GofStatistics, psi_statistic, q_statistic, quadrilateral_count, refit
from .graph import AdjacencyMatrix, ComponentRestriction, is_connected, largest_component
from .parallel import pool_map
from .rng import derive_seed, stream
from .spectral import EigenPairs, score_ratio_matrix, top_eigenpairs

logger = logging.getLogger(__name__)

EIGEN_KEY = 0xE1
BOOTSTRAP_KEY = 0xB0


@dataclass(frozen=True)
class BootstrapNull:
    m: int
    N: int
    u_hat: float
    sigma_hat: float
    Q_values: np.ndarray
    redraws: int = 0


@dataclass(frozen=True)
class StepRecord:
    m: int
    decision: str                      # "continue", "accept" or "error"
    labels: Optional[np.ndarray] = None
    stats: Optional[GofStatistics] = None
    reason: Optional[str] = None
    null: Optional[BootstrapNull] = None

    @property
    def psi(self) -> Optional[float]:
        """The value compared with z_alpha (psi*, when a bootstrap null is attached)"""
        if self.stats is None:
            return None
        if self.null is not None:
            return (self.stats.Q - self.null.u_hat) / self.null.sigma_hat
        return self.stats.psi


@dataclass(frozen=True)
class StgofResult:
    k_hat: Optional[int]
    steps: List[StepRecord]
    terminated_by: str                 # "acceptance" or "k_max"
    argmin_suggestion: Optional[int]
    alpha: float
    z_alpha: float
    k_max: int
    seed: int
    mode: str = "stgof"
    restriction: Optional[ComponentRestriction] = None
    bootstrap_replicates: Optional[int] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.restriction.graph.n if self.restriction else 0

    def to_dict(self, input_path: Optional[str] = None, include_timings: bool = False) -> dict:
        """Report in the ``stgof-report/1`` schema"""
        steps = []
        for step in self.steps:
            stats = step.stats
            steps.append(StepReport(
                m=step.m,
                psi=step.psi,
                Q=stats.Q if stats else None,
                B=stats.B if stats else None,
                C=stats.C if stats else None,
                decision=step.decision,
                reason=step.reason,
                null_mean=step.null.u_hat if step.null else None,
                null_sd=step.null.sigma_hat if step.null else None,
            ))
        graph = self.restriction.graph if self.restriction else None
        report = EstimateReport(
            input=input_path,
            mode=self.mode,
            n=graph.n if graph else 0,
            edges=graph.edge_count if graph else 0,
            restricted_to_giant_component=bool(self.restriction and self.restriction.dropped),
            dropped_nodes=self.restriction.dropped if self.restriction else 0,
            alpha=self.alpha,
            z_alpha=self.z_alpha,
            k_max=self.k_max,
            k_hat=self.k_hat,
            terminated_by=self.terminated_by,
            argmin_suggestion=self.argmin_suggestion,
            seed=self.seed,
            bootstrap_replicates=self.bootstrap_replicates,
            steps=steps,
            timings=dict(self.timings) if include_timings else None,
        )
        return report.model_dump()


def z_alpha(alpha: float) -> float:
    """Upper-alpha quantile of N(0, 1) (scipy's ndtri, accurate to machine precision)"""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return float(ndtri(1.0 - alpha))


def score_labels(pairs: EigenPairs, m: int, config: Optional[StgofConfig] = None) -> np.ndarray:
    """SCORE labels at working dimension m; m = 1 gives the all-ones (single cluster) labeling"""
    config = config or StgofConfig()
    n = pairs.vectors.shape[0]
    if m == 1:
        return np.zeros(n, dtype=np.int64)
    ratios = score_ratio_matrix(pairs, m, clip=config.clip)
    assignment = kmeans(
        ratios.R, m,
        restarts=config.kmeans.restarts,
        max_iter=config.kmeans.max_iter,
        seed=config.seed,
        key=(m,),
    )
    return assignment.labels


def _prepare(A: AdjacencyMatrix, config: StgofConfig):
    restriction = largest_component(A)
    if restriction.dropped:
        logger.warning(
            "input is disconnected; continuing on the largest component (%d of %d nodes)",
            restriction.graph.n, A.n,
        )
    graph = restriction.graph
    C = quadrilateral_count(graph)
    if C == 0:
        raise StatisticUndefinedError("graph has no quadrilaterals; statistic undefined")
    top = min(config.k_max, graph.n - 1)
    pairs = top_eigenpairs(
        graph, top, seed=derive_seed(config.seed, EIGEN_KEY), config=config.eigen
    )
    return restriction, graph, C, top, pairs


def _stepwise(graph: AdjacencyMatrix, pairs: EigenPairs, C: int, top: int,
              config: StgofConfig,
              null_for: Optional[Callable[[int], BootstrapNull]] = None) -> Tuple:
    threshold = z_alpha(config.alpha)
    steps: List[StepRecord] = []
    for m in range(1, top + 1):
        labels = None
        try:
            labels = score_labels(pairs, m, config)
            stats = psi_statistic(graph, labels, C=C, m=m)
        except (RefitError, ClusteringError) as exc:
            logger.warning("m=%d rejected: %s", m, exc)
            steps.append(StepRecord(m=m, decision="error", labels=labels, reason=str(exc)))
            continue

        null = null_for(m) if null_for is not None else None
        step = StepRecord(m=m, decision="continue", labels=labels, stats=stats, null=null)
        accepted = step.psi < threshold
        logger.info("m=%d: psi=%.4f (%s)", m, step.psi, "accept" if accepted else "reject")
        if accepted:
            steps.append(StepRecord(m=m, decision="accept", labels=labels, stats=stats, null=null))
            return steps, m
        steps.append(step)
    return steps, None


def _finish(steps: List[StepRecord], accepted: Optional[int], config: StgofConfig,
            **fields) -> StgofResult:
    scored = [step for step in steps if step.psi is not None and np.isfinite(step.psi)]
    argmin = min(scored, key=lambda step: step.psi).m if scored else None
    if accepted is not None:
        k_hat, terminated_by = accepted, "acceptance"
    else:
        logger.warning("no m up to k_max=%d was accepted (argmin psi at m=%s)",
                       config.k_max, argmin)
        k_hat = argmin if config.fallback == "argmin" else None
        terminated_by = "k_max"
    return StgofResult(
        k_hat=k_hat,
        steps=steps,
        terminated_by=terminated_by,
        argmin_suggestion=argmin,
        alpha=config.alpha,
        z_alpha=z_alpha(config.alpha),
        k_max=config.k_max,
        seed=config.seed,
        **fields,
    )


def estimate_k(A: AdjacencyMatrix, config: Optional[StgofConfig] = None) -> StgofResult:
    """
    Stepwise estimate K_hat = min{m : psi_n^(m) < z_alpha}.

    A disconnected input is restricted to its largest component (reported in
    ``result.restriction``). A step whose refit fails counts as a rejection.

    Raises:
        StatisticUndefinedError: The graph has no quadrilaterals.
    """
    config = config or StgofConfig()
    started = time.perf_counter()
    restriction, graph, C, top, pairs = _prepare(A, config)
    spectral_done = time.perf_counter()
    steps, accepted = _stepwise(graph, pairs, C, top, config)
    finished = time.perf_counter()
    return _finish(
        steps, accepted, config,
        restriction=restriction,
        timings={"spectral": spectral_done - started, "steps": finished - spectral_done},
    )


def _bootstrap_replicate(key: int, base: np.ndarray, residual: np.ndarray, m: int,
                         config: StgofConfig, seed: int, permute: bool) -> Tuple[float, int]:
    """Q_n of one bootstrap graph, plus the number of redraws it needed"""
    rng = stream(seed, BOOTSTRAP_KEY, m, key)
    n = base.shape[0]
    order = rng.permutation(n) if permute else np.arange(n)
    omega = np.clip(base + residual[np.ix_(order, order)], 0.0, 1.0)

    for attempt in range(config.connect_retries):
        graph = sample_adjacency(omega, rng)
        if graph.edge_count == 0 or not is_connected(graph):
            continue
        try:
            pairs = top_eigenpairs(
                graph, m, seed=derive_seed(seed, BOOTSTRAP_KEY, m, key, attempt),
                config=config.eigen,
            )
            labels = score_labels(pairs, m, config)
            return q_statistic(graph, refit(graph, labels, m)), attempt
        except (RefitError, ClusteringError) as exc:
            logger.debug("bootstrap replicate %d redrawn: %s", key, exc)
    raise BootstrapError(
        f"no usable bootstrap graph after {config.connect_retries} draws "
        f"(m={m}); the rank-{m} fit looks degenerate"
    )


def bootstrap_null(A: AdjacencyMatrix, m: int, N: int, seed: int, eigens: EigenPairs,
                   config: Optional[StgofConfig] = None, permute: bool = True,
                   streams: Optional[Sequence[int]] = None) -> BootstrapNull:
    """
    Empirical null of Q_n^(m) from the rank-m fit M = sum_k lambda_k xi_k xi_k'.

    Each replicate permutes rows and columns of S = A - M together, clips
    M + S_perm to [0, 1], samples a Bernoulli graph (redrawing until it is
    connected) and recomputes Q_n^(m) through the full step-m pipeline.
    ``streams`` overrides the per-replicate stream keys (default 0..N-1).

    Raises:
        BootstrapError: Too many unusable draws, or a zero null sd.
    """
    config = config or StgofConfig()
    if N < 2:
        raise BootstrapError("the bootstrap needs at least two replicates")
    if m < 1:
        raise ValueError("m must be at least 1")
    keys = list(range(N)) if streams is None else list(streams)
    head = eigens.head(m)
    base = (head.vectors * head.lambdas) @ head.vectors.T
    residual = A.to_dense() - base

    worker = partial(_bootstrap_replicate, base=base, residual=residual, m=m,
                     config=config, seed=seed, permute=permute)
    outcomes = pool_map(worker, keys, workers=config.workers)
    values = np.array([q for q, _ in outcomes])
    redraws = int(sum(r for _, r in outcomes))
    if redraws:
        logger.warning("bootstrap at m=%d needed %d redraws", m, redraws)

    sigma = float(np.std(values, ddof=1))
    if not sigma > 0:
        raise BootstrapError(f"bootstrap replicates of Q_n at m={m} have zero spread")
    return BootstrapNull(m=m, N=len(keys), u_hat=float(values.mean()), sigma_hat=sigma,
                         Q_values=values, redraws=redraws)


def estimate_k_star(A: AdjacencyMatrix, config: Optional[StgofConfig] = None,
                    N: Optional[int] = None, seed: Optional[int] = None) -> StgofResult:
    """Stepwise estimate with psi* = (Q_n - u_hat) / sigma_hat from ``bootstrap_null``"""
    config = config or StgofConfig()
    N = config.bootstrap_replicates if N is None else N
    seed = config.seed if seed is None else seed
    started = time.perf_counter()
    restriction, graph, C, top, pairs = _prepare(A, config)

    def null_for(m: int) -> BootstrapNull:
        return bootstrap_null(graph, m, N, seed, pairs, config)

    steps, accepted = _stepwise(graph, pairs, C, top, config, null_for)
    return _finish(
        steps, accepted, config,
        mode="stgof*",
        restriction=restriction,
        bootstrap_replicates=N,
        timings={"total": time.perf_counter() - started},
    )


def psi_profile(A: AdjacencyMatrix, ms: Sequence[int],
                config: Optional[StgofConfig] = None) -> List[StepRecord]:
    """psi_n^(m) for every m in ``ms``, without stopping at the first acceptance"""
    config = config or StgofConfig()
    restriction = largest_component(A)
    graph = restriction.graph
    C = quadrilateral_count(graph)
    if C == 0:
        raise StatisticUndefinedError("graph has no quadrilaterals; statistic undefined")
    depth = min(max(ms), graph.n - 1)
    pairs = top_eigenpairs(graph, depth, seed=derive_seed(config.seed, EIGEN_KEY),
                           config=config.eigen)
    threshold = z_alpha(config.alpha)

    records = []
    for m in ms:
        if m > depth:
            records.append(StepRecord(m=m, decision="error", reason="m exceeds n - 1"))
            continue
        try:
            labels = score_labels(pairs, m, config)
            stats = psi_statistic(graph, labels, C=C, m=m)
        except (RefitError, ClusteringError) as exc:
            records.append(StepRecord(m=m, decision="error", reason=str(exc)))
            continue
        decision = "accept" if stats.psi < threshold else "continue"
        records.append(StepRecord(m=m, decision=decision, labels=labels, stats=stats))
    return records
