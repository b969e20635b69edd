"""
Monte Carlo runners behind the ``experiment``, ``calibrate`` and ``generate``
commands. Every replicate is a pure function of (spec, sweep point, replicate)
so runs are reproducible whatever the worker count.
"""
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from models import ExperimentSpec, SimulationConfig, StgofConfig
from .dcbm import (
    DcbmParams, build_lower_bound_model, build_omega, sample_adjacency, sample_params,
    simulate_network,
)
from .errors import ComparisonFormatError, StgofError
from .graph import AdjacencyMatrix, save_edge_list
from .parallel import pool_map
from .rng import stream
from .stgof import estimate_k, psi_profile

logger = logging.getLogger(__name__)

ACCURACY_SCHEMA = "stgof-accuracy/1"
SAMPLES_SCHEMA = "stgof-calibration-samples/1"
SUMMARY_SCHEMA = "stgof-calibration-summary/1"
LOWER_BOUND_KEY = 0x1B
COMPARISON_COLUMNS = ("beta_n", "replicate", "method", "k_hat")
_METHOD_NAME = r"[A-Za-z0-9_.+-]+"


@dataclass(frozen=True)
class _Task:
    point: int
    replicate: int
    config: SimulationConfig
    estimator: StgofConfig


def write_table(frame: pd.DataFrame, path: Union[str, Path], schema: str) -> Path:
    """CSV with a ``# schema=...`` line ahead of the header"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# schema={schema}\n")
        frame.to_csv(handle, index=False, float_format="%.10g", lineterminator="\n")
    return path


def _tasks(spec: ExperimentSpec) -> List[_Task]:
    replicates = spec.simulation.run.replicates
    return [
        _Task(point, replicate, spec.config_at(beta), spec.estimator)
        for point, beta in enumerate(spec.sweep.beta_values)
        for replicate in range(replicates)
    ]


def _estimate_replicate(task: _Task) -> Dict:
    started = time.perf_counter()
    network = simulate_network(task.config, task.replicate, stream_keys=(task.point,))
    outcome = {"point": task.point, "k_hat": None, "psi": {}, "error": None}
    try:
        result = estimate_k(network.adjacency, task.estimator)
        outcome["k_hat"] = result.k_hat
        outcome["psi"] = {step.m: step.psi for step in result.steps if step.psi is not None}
    except StgofError as exc:
        logger.warning("point %d replicate %d failed: %s", task.point, task.replicate, exc)
        outcome["error"] = type(exc).__name__
    outcome["runtime"] = time.perf_counter() - started
    return outcome


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None,
                   progress: bool = True,
                   comparison: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """
    Accuracy of K_hat over the sweep: one row per beta_n with the fraction of
    replicates where K_hat == K, the mean psi of each step m = 1..K among the
    replicates that reached it, and the failure count. A ``runtime`` column
    (mean seconds per replicate) is added only when ``run.record_timings`` is
    set. ``comparison`` (see ``load_comparison_csv``) appends one
    ``accuracy_<method>`` column per competing method.
    """
    workers = workers or spec.simulation.run.workers
    outcomes = pool_map(_estimate_replicate, _tasks(spec), workers=workers,
                        progress=spec.name if progress else None)
    K = spec.simulation.model.K
    replicates = spec.simulation.run.replicates

    rows = []
    for point, beta in enumerate(spec.sweep.beta_values):
        group = [o for o in outcomes if o["point"] == point]
        row = {
            "beta_n": beta,
            "b_n": spec.sweep.solved_b(beta),
            "replicates": replicates,
            "accuracy": sum(o["k_hat"] == K for o in group) / replicates,
            "failures": sum(o["error"] is not None for o in group),
        }
        for m in range(1, K + 1):
            values = [o["psi"][m] for o in group if m in o["psi"]]
            row[f"mean_psi_m{m}"] = float(np.mean(values)) if values else np.nan
        if spec.simulation.run.record_timings:
            row["runtime"] = float(np.mean([o["runtime"] for o in group]))
        rows.append(row)

    table = pd.DataFrame(rows)
    if comparison is not None:
        extra = comparison_accuracy(comparison, spec.sweep.beta_values, K)
        table = pd.concat([table, extra], axis=1)
    return table


def load_comparison_csv(path: Union[str, Path]) -> pd.DataFrame:
    """
    K estimates of other methods on the same sweep, to report next to StGoF.

    One row per (beta_n, replicate, method) with the columns ``beta_n``,
    ``replicate``, ``method`` and ``k_hat``. Lines starting with ``#`` are
    skipped; an empty ``k_hat`` counts as a failed run of that method.

    Raises:
        ComparisonFormatError: Missing columns, non-numeric values, a method
            name outside [A-Za-z0-9_.+-] or a repeated (beta_n, replicate, method).
    """
    try:
        frame = pd.read_csv(path, comment="#", skipinitialspace=True, dtype={"method": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ComparisonFormatError(f"{path}: {exc}") from None
    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in COMPARISON_COLUMNS if column not in frame.columns]
    if missing:
        raise ComparisonFormatError(f"{path}: missing column(s) {', '.join(missing)}")
    frame = frame[list(COMPARISON_COLUMNS)].copy()

    for column in ("beta_n", "replicate", "k_hat"):
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna() & (frame[column].notna() | (column != "k_hat"))
        if bad.any():
            raise ComparisonFormatError(
                f"{path}: {column} must be numeric, got {frame[column][bad].iloc[0]!r}"
            )
        frame[column] = values
    if (frame["replicate"] % 1 != 0).any():
        raise ComparisonFormatError(f"{path}: replicate must be an integer")
    frame["replicate"] = frame["replicate"].astype(np.int64)

    if frame["method"].isna().any():
        raise ComparisonFormatError(f"{path}: empty method name")
    frame["method"] = frame["method"].str.strip()
    invalid = ~frame["method"].str.fullmatch(_METHOD_NAME)
    if invalid.any():
        raise ComparisonFormatError(
            f"{path}: invalid method name {frame['method'][invalid].iloc[0]!r}"
        )
    if frame.duplicated(["beta_n", "replicate", "method"]).any():
        raise ComparisonFormatError(f"{path}: repeated (beta_n, replicate, method) rows")
    logger.info("loaded %d comparison rows for %d method(s)", len(frame),
                frame["method"].nunique())
    return frame


def comparison_accuracy(comparison: pd.DataFrame, beta_values: Sequence[float],
                        K: int) -> pd.DataFrame:
    """
    One ``accuracy_<method>`` column per method and one row per sweep point:
    the fraction of that method's rows at beta_n with k_hat == K. Rows off the
    beta_n grid are dropped; a method without rows at a point gets NaN.
    """
    betas = np.asarray(beta_values, dtype=float)
    methods = sorted(comparison["method"].unique())
    hits = np.isclose(comparison["beta_n"].to_numpy(dtype=float)[:, None], betas[None, :],
                      rtol=1e-9, atol=1e-12)
    on_grid = hits.any(axis=1)
    if not on_grid.all():
        logger.warning("ignoring %d comparison rows off the beta_n grid",
                       int((~on_grid).sum()))

    accuracy = pd.DataFrame(np.nan, index=range(len(betas)), columns=methods)
    rows = comparison[on_grid].assign(point=hits[on_grid].argmax(axis=1))
    if len(rows):
        correct = (rows["k_hat"] == K).groupby([rows["point"], rows["method"]]).mean()
        for (point, method), value in correct.items():
            accuracy.loc[point, method] = value
    accuracy.columns = [f"accuracy_{method}" for method in methods]
    return accuracy


def _calibration_replicate(task: _Task) -> List[Dict]:
    network = simulate_network(task.config, task.replicate, stream_keys=(task.point,))
    K = task.config.model.K
    try:
        records = psi_profile(network.adjacency, list(range(1, K + 1)), task.estimator)
    except StgofError as exc:
        logger.warning("point %d replicate %d failed: %s", task.point, task.replicate, exc)
        return []
    return [
        {
            "beta_n": task.config.model.beta_n,
            "replicate": task.replicate,
            "m": record.m,
            "psi": record.psi,
            "Q": record.stats.Q,
            "B": record.stats.B,
            "C": record.stats.C,
        }
        for record in records if record.stats is not None
    ]


def run_calibration(spec: ExperimentSpec, workers: Optional[int] = None,
                    progress: bool = True) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    psi_n^(m) for m = 1..K on simulated graphs (no stopping).

    Returns the raw samples and a per (beta_n, m) summary with mean, sd,
    quantiles, the fraction of samples above 10 and a Kolmogorov-Smirnov
    p-value against N(0, 1).
    """
    workers = workers or spec.simulation.run.workers
    batches = pool_map(_calibration_replicate, _tasks(spec), workers=workers,
                       progress=spec.name if progress else None)
    samples = pd.DataFrame(
        [row for batch in batches for row in batch],
        columns=["beta_n", "replicate", "m", "psi", "Q", "B", "C"],
    )

    summary_rows = []
    for (beta, m), group in samples.groupby(["beta_n", "m"], sort=True):
        psi = group["psi"].to_numpy()
        summary_rows.append({
            "beta_n": beta,
            "m": m,
            "count": len(psi),
            "mean": float(np.mean(psi)),
            "sd": float(np.std(psi, ddof=1)) if len(psi) > 1 else np.nan,
            "q05": float(np.quantile(psi, 0.05)),
            "q50": float(np.quantile(psi, 0.50)),
            "q95": float(np.quantile(psi, 0.95)),
            "frac_above_10": float(np.mean(psi > 10)),
            "ks_pvalue": float(stats.kstest(psi, "norm").pvalue) if len(psi) > 1 else np.nan,
        })
    return samples, pd.DataFrame(summary_rows)


def _write_graph(directory: Path, stem: str, graph: AdjacencyMatrix,
                 labels: np.ndarray) -> List[Path]:
    graph_path = directory / f"graph_{stem}.txt"
    labels_path = directory / f"labels_{stem}.txt"
    save_edge_list(graph, graph_path)
    with open(labels_path, "w", encoding="utf-8") as handle:
        handle.writelines(f"{node} {label}\n" for node, label in enumerate(labels))
    return [graph_path, labels_path]


def _descriptor(params: DcbmParams, **extra) -> Dict:
    return {
        "n": params.n,
        "K": params.K,
        "theta": params.theta.tolist(),
        "labels": params.labels.tolist(),
        "P": params.P.tolist(),
        **extra,
    }


def generate_datasets(spec: ExperimentSpec, out_dir: Union[str, Path]) -> List[Path]:
    """
    Write sampled graphs and their ground truth, one directory per sweep point.

    Every replicate gives ``graph_rNNN.txt`` (canonical edge list) and
    ``labels_rNNN.txt`` (``node label`` lines). When the spec has a
    ``lower_bound`` section, each point also gets the descriptors
    ``model_base.json`` / ``model_lower_bound.json`` of a base model and its
    split counterpart (same Omega up to the split, sharing theta) and graphs
    sampled from both.
    """
    out_dir = Path(out_dir)
    written: List[Path] = []
    seed = spec.simulation.run.seed
    for point, beta in enumerate(spec.sweep.beta_values):
        config = spec.config_at(beta)
        directory = out_dir / f"point_{point:02d}"
        directory.mkdir(parents=True, exist_ok=True)

        for replicate in range(config.run.replicates):
            network = simulate_network(config, replicate, stream_keys=(point,))
            written += _write_graph(directory, f"r{replicate:03d}", network.adjacency,
                                    network.labels)

        if spec.lower_bound is None:
            continue
        rng = stream(seed, point, LOWER_BOUND_KEY)
        base = sample_params(config, rng)
        model = build_lower_bound_model(base, spec.lower_bound.m, spec.lower_bound.b_n, rng)
        for name, params, extra in (
            ("base", base, {}),
            ("lower_bound", model.params,
             {"m": model.m, "b_n": model.b_n, "P_unscaled": model.P.tolist(),
              "theta_unscaled": base.theta.tolist()}),
        ):
            path = directory / f"model_{name}.json"
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(_descriptor(params, **extra), handle, indent=2)
            written.append(path)
            for replicate in range(config.run.replicates):
                graph = sample_adjacency(build_omega(params), rng)
                written += _write_graph(directory, f"{name}_r{replicate:03d}", graph,
                                        params.labels)
        logger.info("point %d: wrote lower-bound pair with m=%d", point, model.m)
    return written
