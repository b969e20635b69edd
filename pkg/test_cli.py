import json

import numpy as np
import pandas as pd
import pytest

from core.errors import ComparisonFormatError
from core.graph import load_edge_list, save_edge_list
from core.harness import load_comparison_csv
from main import (
    EXIT_ACCEPTED, EXIT_INPUT, EXIT_KMAX, EXIT_UNDEFINED, EXIT_USAGE, create_argument_parser,
    main,
)
from conftest import planted_graph

SMALL_SPEC = {
    "name": "small",
    "simulation": {
        "model": {"n": 200, "K": 2},
        "theta": {"law": "uniform", "low": 2.0, "high": 3.0},
        "P": {"pattern": "toeplitz"},
        "run": {"replicates": 2, "seed": 5},
    },
    "sweep": {"beta_values": [8.0, 10.0], "snr_target": 6.0},
}


def write_spec(tmp_path, spec, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return str(path)


def write_text(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content)
    return str(path)


@pytest.fixture
def planted_file(tmp_path):
    graph, _ = planted_graph(0)
    path = tmp_path / "planted.txt"
    save_edge_list(graph, path)
    return str(path)


def test_estimate_writes_json_to_stdout(karate_file, capsys):
    assert main(["estimate", "--input", str(karate_file)]) == EXIT_ACCEPTED
    report = json.loads(capsys.readouterr().out)
    assert report["schema_version"] == "stgof-report/1"
    assert report["k_hat"] == 2
    assert report["input"] == str(karate_file)


def test_estimate_markdown_to_file(karate_file, tmp_path):
    out = tmp_path / "reports" / "karate.md"
    code = main(["-q", "estimate", "-i", str(karate_file), "--format", "markdown", "-o", str(out)])
    assert code == EXIT_ACCEPTED
    text = out.read_text()
    assert text.startswith("# Number of communities")
    assert "K_hat = **2**" in text


def test_estimate_options_reach_the_report(karate_file, tmp_path, capsys):
    config = tmp_path / "estimator.json"
    config.write_text(json.dumps({"k_max": 4, "kmeans": {"restarts": 30}}))
    code = main(["estimate", "-i", str(karate_file), "--config", str(config), "--seed", "3",
                 "--timings"])
    assert code == EXIT_ACCEPTED
    report = json.loads(capsys.readouterr().out)
    assert report["k_max"] == 4
    assert report["seed"] == 3
    assert set(report["timings"]) == {"spectral", "steps"}


def test_k_max_exhausted(planted_file, capsys):
    assert main(["estimate", "-i", planted_file, "--kmax", "1"]) == EXIT_KMAX
    report = json.loads(capsys.readouterr().out)
    assert report["k_hat"] is None
    assert report["terminated_by"] == "k_max"

    assert main(["estimate", "-i", planted_file, "--kmax", "1", "--fallback", "argmin"]) \
        == EXIT_KMAX
    assert json.loads(capsys.readouterr().out)["k_hat"] == 1


def test_tree_input_is_undefined(tmp_path):
    path = tmp_path / "path.txt"
    path.write_text("0 1\n1 2\n2 3\n3 4\n")
    assert main(["estimate", "-i", str(path)]) == EXIT_UNDEFINED


def test_bad_inputs(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 x\n")
    assert main(["estimate", "-i", str(bad)]) == EXIT_INPUT
    assert main(["estimate", "-i", str(tmp_path / "missing.txt")]) == EXIT_INPUT

    spec = dict(SMALL_SPEC, simulation=dict(SMALL_SPEC["simulation"], run={"replicates": 0}))
    assert main(["experiment", write_spec(tmp_path, spec)]) == EXIT_INPUT

    infeasible = dict(SMALL_SPEC, sweep={"beta_values": [5.0], "snr_target": 6.0})
    assert main(["experiment", write_spec(tmp_path, infeasible, "infeasible.json")]) == EXIT_INPUT


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["experiment"]) == EXIT_USAGE
    with pytest.raises(SystemExit):
        create_argument_parser().parse_args(["estimate"])


def test_experiment_is_reproducible(tmp_path):
    spec = write_spec(tmp_path, SMALL_SPEC)
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    assert main(["-q", "experiment", spec, "-o", str(first)]) == EXIT_ACCEPTED
    assert main(["-q", "experiment", spec, "-o", str(second), "--workers", "2"]) == EXIT_ACCEPTED

    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text().splitlines()
    assert lines[0] == "# schema=stgof-accuracy/1"
    assert lines[1] == "beta_n,b_n,replicates,accuracy,failures,mean_psi_m1,mean_psi_m2"
    assert len(lines) == 4


def test_experiment_overrides(tmp_path):
    out = tmp_path / "acc.csv"
    spec = write_spec(tmp_path, SMALL_SPEC)
    assert main(["-q", "experiment", spec, "--replicates", "1", "--seed", "9",
                 "-o", str(out)]) == EXIT_ACCEPTED
    row = out.read_text().splitlines()[2].split(",")
    assert row[2] == "1"


def test_runtime_column_is_opt_in(tmp_path):
    simulation = dict(SMALL_SPEC["simulation"],
                      run={"replicates": 1, "seed": 5, "record_timings": True})
    out = tmp_path / "timed.csv"
    spec = write_spec(tmp_path, dict(SMALL_SPEC, simulation=simulation))
    assert main(["-q", "experiment", spec, "-o", str(out)]) == EXIT_ACCEPTED

    table = pd.read_csv(out, comment="#")
    assert table.columns[-1] == "runtime"
    assert (table["runtime"] > 0).all()


COMPARISON_CSV = """# K estimates of other methods
beta_n,replicate,method,k_hat
8,0,bic,2
8,1,bic,2
8,0,ecv,2
8,1,ecv,3
10,0,bic,3
10,1,bic,
99,0,ecv,2
"""


def test_experiment_merges_comparison_columns(tmp_path):
    others = tmp_path / "others.csv"
    others.write_text(COMPARISON_CSV)
    out = tmp_path / "acc.csv"
    assert main(["-q", "experiment", write_spec(tmp_path, SMALL_SPEC), "--compare", str(others),
                 "-o", str(out)]) == EXIT_ACCEPTED

    table = pd.read_csv(out, comment="#")
    assert list(table.columns[-2:]) == ["accuracy_bic", "accuracy_ecv"]
    assert table["accuracy_bic"].tolist() == [1.0, 0.0]
    assert table["accuracy_ecv"][0] == 0.5
    assert np.isnan(table["accuracy_ecv"][1])


def test_comparison_loader_rejects_bad_files(tmp_path):
    loaded = load_comparison_csv(write_text(tmp_path, "ok.csv", COMPARISON_CSV))
    assert loaded["replicate"].dtype == np.int64
    assert np.isnan(loaded["k_hat"].iloc[5])

    for name, content in (
        ("missing.csv", "beta_n,replicate,k_hat\n8,0,2\n"),
        ("text.csv", "beta_n,replicate,method,k_hat\n8,0,bic,two\n"),
        ("repeat.csv", "beta_n,replicate,method,k_hat\n8,0,bic,2\n8,0,bic,3\n"),
        ("name.csv", "beta_n,replicate,method,k_hat\n8,0,my method,2\n"),
    ):
        with pytest.raises(ComparisonFormatError):
            load_comparison_csv(write_text(tmp_path, name, content))

    spec = write_spec(tmp_path, SMALL_SPEC)
    assert main(["-q", "experiment", spec, "--compare",
                 str(tmp_path / "repeat.csv")]) == EXIT_INPUT
    assert main(["-q", "experiment", spec, "--compare",
                 str(tmp_path / "absent.csv")]) == EXIT_INPUT


def test_calibrate_writes_samples_and_summary(tmp_path):
    samples, summary = tmp_path / "samples.csv", tmp_path / "summary.csv"
    code = main(["-q", "calibrate", write_spec(tmp_path, SMALL_SPEC), "-o", str(samples),
                 "--summary", str(summary)])
    assert code == EXIT_ACCEPTED

    sample_lines = samples.read_text().splitlines()
    assert sample_lines[0] == "# schema=stgof-calibration-samples/1"
    assert sample_lines[1] == "beta_n,replicate,m,psi,Q,B,C"
    assert len(sample_lines) == 2 + 2 * 2 * 2

    summary_lines = summary.read_text().splitlines()
    assert summary_lines[0] == "# schema=stgof-calibration-summary/1"
    assert summary_lines[1].startswith("beta_n,m,count,mean,sd")
    assert len(summary_lines) == 2 + 2 * 2


def test_generate_writes_graphs_and_labels(tmp_path):
    out = tmp_path / "synthetic"
    assert main(["-q", "generate", write_spec(tmp_path, SMALL_SPEC), "--out", str(out)]) == 0

    point = out / "point_00"
    graph = load_edge_list(point / "graph_r000.txt")
    labels = np.loadtxt(point / "labels_r000.txt", dtype=int)
    assert labels.shape == (200, 2)
    assert labels[:, 0].tolist() == list(range(200))
    assert set(labels[:, 1]) <= {0, 1}
    assert graph.n <= 200
    assert (out / "point_01" / "graph_r001.txt").exists()


def test_generate_lower_bound_pair(tmp_path):
    spec = dict(SMALL_SPEC, lower_bound={"m": 1, "b_n": 0.9})
    spec["sweep"] = {"beta_values": [8.0], "snr_target": 6.0}
    out = tmp_path / "pairs"
    assert main(["-q", "generate", write_spec(tmp_path, spec), "--out", str(out)]) == 0

    point = out / "point_00"
    base = json.loads((point / "model_base.json").read_text())
    split = json.loads((point / "model_lower_bound.json").read_text())
    assert base["K"] == 2 and split["K"] == 3
    assert split["m"] == 1 and split["b_n"] == 0.9
    assert split["theta_unscaled"] == base["theta"]
    assert np.allclose(np.diag(split["P"]), 1.0)
    for name in ("base", "lower_bound"):
        assert (point / f"graph_{name}_r000.txt").exists()
        assert (point / f"labels_{name}_r001.txt").exists()


def test_generate_from_preset(tmp_path):
    out = tmp_path / "preset"
    code = main(["-q", "generate", "--preset", "4a", "--replicates", "1", "--out", str(out)])
    assert code == EXIT_ACCEPTED
    assert load_edge_list(out / "point_00" / "graph_r000.txt").n <= 600
