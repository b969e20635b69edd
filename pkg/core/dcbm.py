import logging
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from models import (
    ExperimentSpec, MembershipVariant, PiLaw, PPattern, SimulationConfig, ThetaLaw,
)
from .errors import ParameterError, ParameterScaleError, SingularMatrixError
from .graph import AdjacencyMatrix
from .rng import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DcbmParams:
    """
    DCBM parameters (theta, Pi, P) with Omega = Theta Pi P Pi' Theta.

    ``strict`` requires one-hot membership rows; mixed-membership simulations
    pass ``strict=False`` and rows only need to lie on the simplex.
    ``require_nonsingular`` can be switched off for the degenerate lower-bound
    models, where P is allowed to lose rank.
    """
    theta: np.ndarray
    pi: np.ndarray
    P: np.ndarray
    strict: bool = True
    require_nonsingular: bool = True
    singular_tol: float = 1e-10

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        pi = np.atleast_2d(np.asarray(self.pi, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "P", P)

        n, K = pi.shape
        if theta.shape != (n,):
            raise ParameterError(f"theta has shape {theta.shape}, expected ({n},)")
        if P.shape != (K, K):
            raise ParameterError(f"P has shape {P.shape}, expected ({K}, {K})")
        if np.any(theta <= 0):
            raise ParameterError("every theta_i must be positive")
        if np.any(pi < 0) or not np.allclose(pi.sum(axis=1), 1.0, atol=1e-12):
            raise ParameterError("membership rows must lie on the simplex")
        if self.strict and not np.all((pi == 0) | (pi == 1)):
            raise ParameterError("strict DCBM needs one-hot membership rows")
        if not np.allclose(P, P.T, atol=1e-12) or np.any(P < 0):
            raise ParameterError("P must be symmetric and nonnegative")
        if not np.allclose(np.diag(P), 1.0, atol=1e-12):
            raise ParameterError("P must have unit diagonal")
        if self.require_nonsingular:
            smallest = np.linalg.svd(P, compute_uv=False).min()
            if smallest <= self.singular_tol:
                raise SingularMatrixError(
                    f"P is singular: smallest singular value {smallest:.3g}"
                )

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    @property
    def K(self) -> int:
        return self.pi.shape[1]

    @property
    def labels(self) -> np.ndarray:
        """Community of each node (argmax of its membership row)"""
        return np.argmax(self.pi, axis=1)

    def permuted(self, order: np.ndarray) -> "DcbmParams":
        return DcbmParams(
            theta=self.theta[order], pi=self.pi[order], P=self.P,
            strict=self.strict, require_nonsingular=self.require_nonsingular,
        )


@dataclass(frozen=True)
class SnrReport:
    lambdas: np.ndarray
    snr: float
    a0: float
    s_n: float
    theta_max: float
    theta_min: float
    theta_norm: float
    theta_l1: float


@dataclass(frozen=True)
class HphSpectrum:
    """Eigenstructure of HPH, H = diag(||theta^(k)|| / ||theta||)"""
    H: np.ndarray
    mu: np.ndarray
    eta: np.ndarray
    perron_simple: bool = True


@dataclass(frozen=True)
class LowerBoundModel:
    """
    K0 + m community model built from a K0 community base.

    ``P`` is the enlarged matrix before reparametrization (its lower right
    block has diagonal (m + 1) / (1 + m b_n)); ``params`` is the unit-diagonal
    reparametrization (theta*, Pi, P*), which yields the same Omega.
    """
    base: DcbmParams
    m: int
    b_n: float
    P: np.ndarray
    labels: np.ndarray
    params: DcbmParams

    def omega_unscaled(self) -> np.ndarray:
        return _omega(self.base.theta, _one_hot(self.labels, self.P.shape[0]), self.P)


@dataclass(frozen=True)
class VariantOutcome:
    omega: np.ndarray
    outliers: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    clipped: int = 0


@dataclass(frozen=True)
class SimulatedNetwork:
    params: DcbmParams
    omega: np.ndarray
    adjacency: AdjacencyMatrix
    labels: np.ndarray
    outliers: np.ndarray


def _one_hot(labels: np.ndarray, K: int) -> np.ndarray:
    pi = np.zeros((len(labels), K))
    pi[np.arange(len(labels)), labels] = 1.0
    return pi


def _omega(theta: np.ndarray, pi: np.ndarray, P: np.ndarray) -> np.ndarray:
    weighted = theta[:, None] * pi
    return weighted @ P @ weighted.T


def build_omega(params: DcbmParams, zero_diagonal: bool = False) -> np.ndarray:
    """
    Dense Omega = Theta Pi P Pi' Theta.

    The diagonal holds theta_i^2 pi_i' P pi_i (needed for the eigenvalue
    identities) unless ``zero_diagonal`` is set; sampling never reads it.

    Raises:
        ParameterScaleError: Some off-diagonal Omega_ij is >= 1.
    """
    omega = _omega(params.theta, params.pi, params.P)
    off = omega.copy()
    np.fill_diagonal(off, -np.inf)
    worst = np.unravel_index(np.argmax(off), off.shape)
    if params.n > 1 and off[worst] >= 1.0:
        raise ParameterScaleError((int(worst[0]), int(worst[1])), float(off[worst]))
    if zero_diagonal:
        np.fill_diagonal(omega, 0.0)
    return omega


def sample_adjacency(source: Union[DcbmParams, np.ndarray],
                     rng: Union[int, np.random.Generator]) -> AdjacencyMatrix:
    """A_ij ~ Bernoulli(Omega_ij) independently for i < j, symmetrized"""
    if isinstance(rng, (int, np.integer)):
        rng = stream(int(rng))
    if isinstance(source, DcbmParams):
        omega = build_omega(source)
    else:
        omega = np.asarray(source, dtype=float)
    n = omega.shape[0]
    rows, cols = np.triu_indices(n, k=1)
    hits = rng.random(len(rows)) < omega[rows, cols]
    return AdjacencyMatrix.from_edges(n, rows[hits], cols[hits])


def draw_theta_tilde(law: ThetaLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    """Raw iid draws from f(theta)"""
    if law.law == "uniform":
        draws = rng.uniform(law.low, law.high, size=n)
    elif law.law == "pareto":
        # numpy draws the Lomax form; shifting by one gives Pareto(shape) on [scale, inf)
        draws = law.scale * (1.0 + rng.pareto(law.shape, size=n))
    elif law.law == "two_point":
        draws = np.where(rng.random(n) < law.p, law.a, law.b)
    else:
        raise ParameterError(f"unknown theta law {law.law!r}")
    if np.any(draws <= 0):
        raise RuntimeError(f"{law.law} law produced a nonpositive theta draw")
    return draws


def sample_theta(law: ThetaLaw, n: int, beta_n: float, rng: np.random.Generator) -> np.ndarray:
    """theta_i = beta_n * theta~_i / ||theta~||, so ||theta|| = beta_n"""
    tilde = draw_theta_tilde(law, n, rng)
    return beta_n * tilde / np.linalg.norm(tilde)


def sample_memberships(pi_law: PiLaw, K: int, n: int, variant: MembershipVariant,
                       rng: np.random.Generator) -> np.ndarray:
    """
    Draw the n x K membership matrix.

    Labels come from the categorical weights first, so a mixed variant with
    ``dirichlet_weight == 0`` consumes the stream exactly like the hard model.
    """
    weights = np.full(K, 1.0 / K) if pi_law.weights is None else np.asarray(pi_law.weights)
    labels = rng.choice(K, size=n, p=weights)
    pi = _one_hot(labels, K)
    if variant.mode == "mixed" and variant.dirichlet_weight > 0:
        mixed = rng.random(n) < variant.dirichlet_weight
        count = int(mixed.sum())
        if count:
            pi[mixed] = rng.dirichlet(np.full(K, variant.dirichlet_alpha), size=count)
    return pi


def build_p(pattern: PPattern, K: int, b_n: float) -> np.ndarray:
    """K x K connectivity matrix with unit diagonal for the simulation patterns"""
    k, l = np.meshgrid(np.arange(K), np.arange(K), indexing="ij")
    gap = np.abs(k - l)
    if pattern.pattern == "toeplitz":
        P = 1.0 - (1.0 - b_n) * (gap + 1) / K
    elif pattern.pattern == "linear_offdiag":
        P = 1.0 - gap * (1.0 - b_n) / 2.0
    elif pattern.pattern == "shifted_toeplitz":
        P = 1.0 - (1.0 - b_n) * (gap + K - 1) / (2.0 * K)
    elif pattern.pattern == "constant_offdiag":
        P = np.full((K, K), b_n)
    elif pattern.pattern == "custom":
        P = np.asarray(pattern.matrix, dtype=float)
    else:
        raise ParameterError(f"unknown P pattern {pattern.pattern!r}")
    P = np.array(P, dtype=float)
    np.fill_diagonal(P, 1.0)
    return P


def sample_params(config: SimulationConfig, rng: np.random.Generator) -> DcbmParams:
    model = config.model
    theta = sample_theta(config.theta, model.n, model.beta_n, rng)
    pi = sample_memberships(config.pi, model.K, model.n, config.variant, rng)
    P = build_p(config.P, model.K, model.b_n)
    return DcbmParams(theta=theta, pi=pi, P=P, strict=config.variant.mode != "mixed")


def apply_variant(omega: np.ndarray, variant: MembershipVariant,
                  rng: np.random.Generator) -> VariantOutcome:
    """
    Apply the misspecification of ``variant`` to a dense Omega.

    Mixed memberships are already carried by Pi (see ``sample_memberships``),
    so only the outlier mode touches Omega here: a random ``outlier_fraction``
    of nodes get every entry of their row and column reset to
    rho_n = sum(Omega) / n (``rho_rule="mean"`` divides by n^2 instead). Entries
    that end up >= 1 are clipped to ``variant.clip_value``.
    """
    omega = np.array(omega, dtype=float)
    n = omega.shape[0]
    outliers = np.empty(0, dtype=np.int64)

    if variant.mode == "outlier" and variant.outlier_fraction > 0:
        if variant.rho_rule == "literal":
            rho = omega.sum() / n
        else:
            rho = omega.sum() / n ** 2
        count = int(round(variant.outlier_fraction * n))
        outliers = np.sort(rng.choice(n, size=count, replace=False))
        omega[outliers, :] = rho
        omega[:, outliers] = rho
        logger.debug("reset %d outlier rows to rho_n=%.4g", count, rho)

    off_diagonal = ~np.eye(n, dtype=bool)
    too_large = (omega >= 1.0) & off_diagonal
    clipped = int(too_large.sum())
    if clipped:
        logger.warning("clipped %d Omega entries to %.10f", clipped, variant.clip_value)
        omega[too_large] = variant.clip_value
    return VariantOutcome(omega=omega, outliers=outliers, clipped=clipped)


def simulate_network(config: SimulationConfig, replicate: int,
                     stream_keys: Tuple[int, ...] = ()) -> SimulatedNetwork:
    """One replicate of the generative protocol; pure given its arguments"""
    rng = stream(config.run.seed, *stream_keys, replicate)
    params = sample_params(config, rng)
    outcome = apply_variant(_omega(params.theta, params.pi, params.P), config.variant, rng)
    adjacency = sample_adjacency(outcome.omega, rng)
    return SimulatedNetwork(
        params=params,
        omega=outcome.omega,
        adjacency=adjacency,
        labels=params.labels,
        outliers=outcome.outliers,
    )


def hph_spectrum(params: DcbmParams, gap_tol: float = 1e-9) -> HphSpectrum:
    """
    Eigenpairs of HPH ordered by decreasing |mu|.

    The nonzero eigenvalues of Omega are ||theta||^2 * mu_k. eta_1 is signed
    so that its entries are positive.
    """
    if not params.strict:
        raise ParameterError("hph_spectrum needs hard memberships")
    norm = np.linalg.norm(params.theta)
    block_norms = np.sqrt(params.pi.T @ params.theta ** 2)
    H = np.diag(block_norms / norm)
    mu, eta = np.linalg.eigh(H @ params.P @ H)
    order = np.argsort(-np.abs(mu), kind="stable")
    mu, eta = mu[order], eta[:, order]

    if eta[:, 0].sum() < 0:
        eta[:, 0] = -eta[:, 0]
    simple = len(mu) == 1 or abs(mu[0]) - abs(mu[1]) > gap_tol * max(1.0, abs(mu[0]))
    if not simple or np.any(eta[:, 0] < -gap_tol):
        logger.warning("leading eigenvalue of HPH is not simple; P may be reducible")
        simple = False
    return HphSpectrum(H=H, mu=mu, eta=eta, perron_simple=simple)


def snr_report(params: DcbmParams) -> SnrReport:
    """SNR |lambda_K| / sqrt(lambda_1) and its heterogeneity-adjusted version s_n"""
    smallest = np.linalg.svd(params.P, compute_uv=False).min()
    if smallest <= params.singular_tol:
        raise SingularMatrixError("snr_report needs a nonsingular P")

    theta = params.theta
    norm = float(np.linalg.norm(theta))
    l1 = float(theta.sum())
    spectrum = hph_spectrum(params)
    lambdas = norm ** 2 * spectrum.mu
    if lambdas[0] <= 0:
        raise ParameterError("leading eigenvalue of Omega is not positive")

    snr = abs(lambdas[-1]) / np.sqrt(lambdas[0])
    t_max, t_min = float(theta.max()), float(theta.min())
    a0 = (t_min / t_max) * norm / np.sqrt(t_max * l1)
    return SnrReport(
        lambdas=lambdas,
        snr=float(snr),
        a0=float(a0),
        s_n=float(a0 * snr),
        theta_max=t_max,
        theta_min=t_min,
        theta_norm=norm,
        theta_l1=l1,
    )


def build_lower_bound_model(base: DcbmParams, m: int, b_n: float,
                            rng: Union[int, np.random.Generator],
                            tol: float = 1e-8) -> LowerBoundModel:
    """
    Split the last community of ``base`` into m + 1 nearly indistinguishable ones.

    With M = (1 - b_n) I + b_n 11', the enlarged P keeps the first K0 - 1
    communities (block S and column beta of the base P) and puts
    (m + 1) / (1 + m b_n) * M on the new block. Nodes of the last base community
    draw their new label uniformly. D = diag(sqrt(P_kk)) then gives the
    unit-diagonal form P* = D^-1 P D^-1 with theta*_i = theta_i * D_{l_i}.

    Raises:
        SingularMatrixError: S is singular.
        ParameterError: |beta' S^-1 beta - 1| is below ``tol``.
    """
    if isinstance(rng, (int, np.integer)):
        rng = stream(int(rng))
    if m < 1:
        raise ParameterError("m must be at least 1")
    if not 0 < b_n <= 1:
        raise ParameterError("b_n must lie in (0, 1]")
    if not base.strict:
        raise ParameterError("lower-bound construction needs hard memberships")

    K0 = base.K
    M = (1.0 - b_n) * np.eye(m + 1) + b_n * np.ones((m + 1, m + 1))
    corner = (m + 1) / (1.0 + m * b_n) * M

    if K0 == 1:
        P = corner
    else:
        S = base.P[:K0 - 1, :K0 - 1]
        beta = base.P[:K0 - 1, K0 - 1]
        if np.linalg.svd(S, compute_uv=False).min() <= base.singular_tol:
            raise SingularMatrixError("sub-matrix S of the base P is singular")
        gap = abs(beta @ np.linalg.solve(S, beta) - 1.0)
        if gap < tol:
            raise ParameterError(f"|beta' S^-1 beta - 1| = {gap:.3g} is too small")
        P = np.block([
            [S, np.outer(beta, np.ones(m + 1))],
            [np.outer(np.ones(m + 1), beta), corner],
        ])

    base_labels = base.labels
    labels = base_labels.copy()
    split = np.flatnonzero(base_labels == K0 - 1)
    labels[split] = K0 - 1 + rng.integers(0, m + 1, size=len(split))

    D = np.sqrt(np.diag(P))
    P_star = P / np.outer(D, D)
    np.fill_diagonal(P_star, 1.0)
    params = DcbmParams(
        theta=base.theta * D[labels],
        pi=_one_hot(labels, K0 + m),
        P=P_star,
        require_nonsingular=False,
    )
    return LowerBoundModel(base=base, m=m, b_n=b_n, P=P, labels=labels, params=params)


_UNIFORM_23 = {"law": "uniform", "low": 2.0, "high": 3.0}
_TWO_POINT = {"law": "two_point", "p": 0.95, "a": 1.0, "b": 2.0}
_MIXED = {"mode": "mixed", "dirichlet_weight": 0.2, "dirichlet_alpha": 1.0}

# name -> (n, K, theta law, pi weights, P pattern, variant, beta grid, (1 - b_n) * beta_n)
_PRESETS = {
    "1a": (600, 4, _UNIFORM_23, None, "toeplitz", None, range(10, 15), 9.5),
    "1b": (600, 4, {"law": "pareto", "shape": 8.0, "scale": 0.375}, None, "toeplitz", None,
           range(10, 15), 9.5),
    "1c": (600, 4, _TWO_POINT, None, "toeplitz", None, range(10, 15), 9.5),
    "2a": (1200, 3, {"law": "pareto", "shape": 10.0, "scale": 0.375}, [0.30, 0.35, 0.35],
           "linear_offdiag", None, range(12, 18), 10.0),
    "2b": (1200, 3, {"law": "pareto", "shape": 10.0, "scale": 0.375}, [0.25, 0.375, 0.375],
           "linear_offdiag", None, range(12, 18), 10.0),
    "2c": (1200, 3, {"law": "pareto", "shape": 10.0, "scale": 0.375}, [0.20, 0.40, 0.40],
           "linear_offdiag", None, range(12, 18), 10.0),
    "3a": (600, 4, _UNIFORM_23, None, "toeplitz", _MIXED, range(11, 17), 10.5),
    "3b": (600, 4, _UNIFORM_23, None, "toeplitz", {"mode": "outlier", "outlier_fraction": 0.1},
           range(11, 19), 10.5),
    "4a": (600, 3, _UNIFORM_23, None, "toeplitz", None, range(10, 16), 9.0),
    "4b": (1200, 3, {"law": "uniform", "low": 3.0, "high": 4.0}, None, "constant_offdiag", None,
           range(6, 12), 4.75),
    "4c": (1200, 4, {"law": "pareto", "shape": 10.0, "scale": 0.375}, None, "toeplitz", _MIXED,
           range(12, 18), 10.5),
    "5a": (600, 6, _TWO_POINT, None, "shifted_toeplitz", None, range(17, 23), 15.5),
    "5b": (600, 8, _TWO_POINT, None, "constant_offdiag", None, range(12, 18), 10.5),
}


def preset_names() -> Tuple[str, ...]:
    return tuple(_PRESETS)


def experiment_preset(name: str, replicates: int = 100, seed: int = 0) -> ExperimentSpec:
    """Sweep specification of one of the canonical simulation settings ("1a" ... "5b")"""
    try:
        n, K, theta, weights, pattern, variant, betas, target = _PRESETS[name]
    except KeyError:
        raise ParameterError(
            f"unknown preset {name!r}; choose one of {', '.join(_PRESETS)}"
        ) from None
    simulation = {
        "model": {"n": n, "K": K, "beta_n": float(betas[0]), "b_n": 1.0 - target / betas[0]},
        "theta": theta,
        "pi": {"weights": weights},
        "P": {"pattern": pattern},
        "variant": variant or {},
        "run": {"replicates": replicates, "seed": seed},
    }
    return ExperimentSpec.model_validate({
        "name": f"experiment-{name}",
        "simulation": simulation,
        "sweep": {"beta_values": [float(b) for b in betas], "snr_target": target},
    })
