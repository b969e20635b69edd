from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Simulation model (the dotted keys model.*, theta.*, pi.*, P.*, variant.*, run.*)
# ---------------------------------------------------------------------------

class ModelSection(_Section):
    n: int = Field(600, ge=2)
    K: int = Field(4, ge=1)
    beta_n: float = Field(14.0, gt=0)
    b_n: float = Field(0.5, gt=0, lt=1)


class ThetaLaw(_Section):
    """f(theta): law of the raw degree parameters before normalization"""
    law: Literal["uniform", "pareto", "two_point"] = "uniform"
    low: float = Field(2.0, gt=0)
    high: float = Field(3.0, gt=0)
    shape: float = Field(8.0, gt=0)
    scale: float = Field(0.375, gt=0)
    p: float = Field(0.95, ge=0, le=1)
    a: float = Field(1.0, gt=0)
    b: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _ordered_support(self):
        if self.law == "uniform" and self.high < self.low:
            raise ValueError("uniform law needs low <= high")
        return self


class PiLaw(_Section):
    """g(pi): categorical weights over the K communities (uniform if omitted)"""
    weights: Optional[List[float]] = None

    @field_validator("weights")
    @classmethod
    def _on_simplex(cls, weights):
        if weights is None:
            return weights
        if any(w < 0 for w in weights):
            raise ValueError("pi.weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"pi.weights must sum to 1, got {sum(weights):.12g}")
        return weights


class PPattern(_Section):
    pattern: Literal[
        "toeplitz", "linear_offdiag", "shifted_toeplitz", "constant_offdiag", "custom"
    ] = "toeplitz"
    matrix: Optional[List[List[float]]] = None


class MembershipVariant(_Section):
    mode: Literal["hard", "mixed", "outlier"] = "hard"
    dirichlet_weight: float = Field(0.0, ge=0, le=1)
    dirichlet_alpha: float = Field(1.0, gt=0)
    outlier_fraction: float = Field(0.0, ge=0, lt=1)
    rho_rule: Literal["literal", "mean"] = "literal"
    clip_value: float = Field(1.0 - 1e-9, gt=0, lt=1)


class RunSection(_Section):
    replicates: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    record_timings: bool = False


class SimulationConfig(_Section):
    model: ModelSection = Field(default_factory=ModelSection)
    theta: ThetaLaw = Field(default_factory=ThetaLaw)
    pi: PiLaw = Field(default_factory=PiLaw)
    P: PPattern = Field(default_factory=PPattern)
    variant: MembershipVariant = Field(default_factory=MembershipVariant)
    run: RunSection = Field(default_factory=RunSection)

    @model_validator(mode="after")
    def _shapes_match_k(self):
        K = self.model.K
        if self.pi.weights is not None and len(self.pi.weights) != K:
            raise ValueError(f"pi.weights has {len(self.pi.weights)} entries for K={K}")
        if self.P.pattern == "custom":
            if self.P.matrix is None:
                raise ValueError("P.pattern 'custom' needs P.matrix")
            if len(self.P.matrix) != K or any(len(row) != K for row in self.P.matrix):
                raise ValueError(f"P.matrix must be {K}x{K}")
        return self

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SimulationConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.model_dump_json(indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# Estimator
# ---------------------------------------------------------------------------

class EigenConfig(_Section):
    method: Literal["block", "dense"] = "block"
    tol: float = Field(1e-8, gt=0)
    max_iter: Optional[int] = Field(None, ge=1)  # None means 10 * n
    oversample: int = Field(10, ge=0)
    dense_below: int = Field(200, ge=0)
    gap_tol: float = Field(1e-6, ge=0)


class KMeansConfig(_Section):
    restarts: int = Field(20, ge=1)
    max_iter: int = Field(300, ge=1)


class StgofConfig(_Section):
    alpha: float = Field(0.05, gt=0, lt=1)
    k_max: int = Field(15, ge=1)
    fallback: Literal["error", "argmin"] = "error"
    clip: Optional[float] = Field(None, gt=0)  # None means log(n)
    seed: int = Field(0, ge=0)
    eigen: EigenConfig = Field(default_factory=EigenConfig)
    kmeans: KMeansConfig = Field(default_factory=KMeansConfig)
    bootstrap_replicates: int = Field(25, ge=2)
    connect_retries: int = Field(50, ge=1)
    workers: int = Field(1, ge=1)


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------

class SweepSection(_Section):
    """beta_n grid with b_n solved from (1 - b_n) * beta_n = snr_target"""
    beta_values: List[float] = Field(..., min_length=1)
    snr_target: float = Field(..., gt=0)

    def solved_b(self, beta: float) -> float:
        return 1.0 - self.snr_target / beta


class LowerBoundSection(_Section):
    m: int = Field(1, ge=1)
    b_n: float = Field(0.9, gt=0, le=1)


class OutputSection(_Section):
    csv: Optional[str] = None
    summary_csv: Optional[str] = None
    directory: Optional[str] = None


class ExperimentSpec(_Section):
    name: str = "experiment"
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    sweep: SweepSection
    estimator: StgofConfig = Field(default_factory=StgofConfig)
    lower_bound: Optional[LowerBoundSection] = None
    outputs: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _feasible_sweep(self):
        for index, beta in enumerate(self.sweep.beta_values):
            b = self.sweep.solved_b(beta)
            if not 0.0 < b < 1.0:
                raise ValueError(
                    f"sweep point {index} (beta_n={beta}): solved b_n={b:.6g} is outside (0, 1)"
                )
        return self

    def config_at(self, beta: float) -> SimulationConfig:
        """Simulation config of one sweep point"""
        model = self.simulation.model.model_copy(
            update={"beta_n": float(beta), "b_n": self.sweep.solved_b(beta)}
        )
        return self.simulation.model_copy(update={"model": model})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentSpec":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

class StepReport(BaseModel):
    m: int
    psi: Optional[float] = None
    Q: Optional[float] = None
    B: Optional[float] = None
    C: Optional[int] = None
    decision: str
    reason: Optional[str] = None
    null_mean: Optional[float] = None
    null_sd: Optional[float] = None


class EstimateReport(BaseModel):
    schema_version: str = "stgof-report/1"
    input: Optional[str] = None
    mode: Literal["stgof", "stgof*"] = "stgof"
    n: int
    edges: int
    restricted_to_giant_component: bool = False
    dropped_nodes: int = 0
    alpha: float
    z_alpha: float
    k_max: int
    k_hat: Optional[int] = None
    terminated_by: Literal["acceptance", "k_max", "error"]
    argmin_suggestion: Optional[int] = None
    seed: int
    bootstrap_replicates: Optional[int] = None
    steps: List[StepReport]
    timings: Optional[Dict[str, float]] = None
