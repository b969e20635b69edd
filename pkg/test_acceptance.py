"""
Monte Carlo and real-data checks of the estimator. They take minutes, so they
only run with ``pytest --runslow``; the real-data cases also need the edge
lists under ``STGOF_DATA_DIR`` (default ./data).
"""
import os

import numpy as np
import pytest

from core.clustering import nsp_check
from core.dcbm import experiment_preset, simulate_network
from core.graph import load_edge_list
from core.harness import run_calibration, run_experiment
from core.spectral import top_eigenpairs
from core.stgof import estimate_k, estimate_k_star, score_labels
from models import ExperimentSpec, SimulationConfig, StgofConfig, SweepSection

pytestmark = pytest.mark.slow

WORKERS = os.cpu_count() or 1


def two_block_spec(replicates=200):
    return ExperimentSpec.model_validate({
        "name": "null_k2",
        "simulation": {
            "model": {"n": 600, "K": 2},
            "theta": {"law": "uniform", "low": 2.0, "high": 3.0},
            "P": {"pattern": "constant_offdiag"},
            "run": {"replicates": replicates, "seed": 11},
        },
        "sweep": {"beta_values": [12.0], "snr_target": 9.0},
    })


@pytest.fixture(scope="module")
def calibration_samples():
    samples, _ = run_calibration(two_block_spec(), workers=WORKERS, progress=False)
    return samples


def test_statistic_is_standard_normal_at_true_k(calibration_samples):
    psi = calibration_samples.loc[calibration_samples["m"] == 2, "psi"].to_numpy()
    assert len(psi) >= 190
    assert -0.3 <= psi.mean() <= 0.3
    assert 0.7 <= psi.std(ddof=1) <= 1.4


def test_statistic_diverges_when_underfitting(calibration_samples):
    psi = calibration_samples.loc[calibration_samples["m"] == 1, "psi"].to_numpy()
    assert np.mean(psi > 10) >= 0.95


def test_accuracy_at_densest_point_of_first_setting():
    spec = experiment_preset("1a", replicates=100, seed=0)
    spec = spec.model_copy(update={"sweep": SweepSection(beta_values=[14.0], snr_target=9.5)})
    table = run_experiment(spec, workers=WORKERS, progress=False)
    assert table.loc[0, "accuracy"] >= 0.80


def test_no_split_property_with_strong_signal():
    config = SimulationConfig.model_validate({
        "model": {"n": 600, "K": 3, "beta_n": 16.0, "b_n": 0.25},
        "theta": {"law": "uniform", "low": 2.0, "high": 3.0},
        "P": {"pattern": "constant_offdiag"},
        "run": {"seed": 21},
    })
    estimator = StgofConfig()
    holds = 0
    for replicate in range(100):
        network = simulate_network(config, replicate)
        pairs = top_eigenpairs(network.adjacency, 2)
        labels = score_labels(pairs, 2, estimator)
        holds += nsp_check(labels, network.labels).holds
    assert holds >= 95


@pytest.mark.realdata
@pytest.mark.parametrize("name, expected", [
    ("football.txt", 10),
    ("ukfaculty.txt", 4),
    ("dolphins.txt", 2),
])
def test_real_networks(data_file, name, expected):
    assert estimate_k(load_edge_list(data_file(name))).k_hat == expected


def test_karate_bootstrap(karate):
    assert estimate_k_star(karate).k_hat == 2


@pytest.mark.realdata
def test_polbooks_bootstrap_over_seeds(data_file):
    graph = load_edge_list(data_file("polbooks.txt"))
    for seed in range(5):
        assert estimate_k_star(graph, StgofConfig(seed=seed)).k_hat in (2, 3)
