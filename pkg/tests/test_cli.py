"""Command-line interface: schemas, determinism, and exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from surrosens.cli import main
from surrosens.data import DataError, load_dataset


def run(tmp_path, *argv):
    return main([str(a) for a in argv])


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


# ---------------------------------------------------------------------------
# dataset loading
# ---------------------------------------------------------------------------


def test_load_dataset_minimal(tmp_path):
    p = tmp_path / "mini.csv"
    p.write_text("sample,w,y,s1,x1\nE,1,,0.5,0.2\nO,,1.5,0.1,0.9\n")
    ds = load_dataset(str(p))
    assert ds.n_rows == 2
    assert ds.n_surrogates == 1 and ds.n_covariates == 1
    assert ds.is_exp.tolist() == [True, False]


def test_load_dataset_rejects_y_on_experimental_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("sample,w,y,s1,x1\nE,1,2.0,0.5,0.2\n")
    with pytest.raises(DataError, match="2"):
        load_dataset(str(p))


def test_load_dataset_rejects_nonbinary_w(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("sample,w,y,s1,x1\nE,0.5,,0.5,0.2\n")
    with pytest.raises(DataError):
        load_dataset(str(p))


def test_load_dataset_rejects_missing_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("sample,w,y,s1\nE,1,,0.5\n")
    with pytest.raises(DataError):
        load_dataset(str(p))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def simulate_config(n=800, rho=0.5, copula=None, seed=7):
    return {
        "seed": seed,
        "simulate": {
            "n": n,
            "rho": rho,
            "copula": copula or {"family": "independence"},
        },
    }


def test_cmd_simulate_deterministic(tmp_path):
    cfg = write_config(tmp_path, simulate_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(tmp_path, "simulate", "--config", cfg, "--out", out1) == 0
    assert run(tmp_path, "simulate", "--config", cfg, "--out", out2) == 0
    assert (out1 / "dataset.csv").read_text() == (out2 / "dataset.csv").read_text()
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["config_digest"] == m2["config_digest"]
    assert m1["seed"] == 7


def test_cmd_simulate_treatment_share(tmp_path):
    cfg = write_config(tmp_path, simulate_config(n=1000))
    out = tmp_path / "sim"
    assert run(tmp_path, "simulate", "--config", cfg, "--out", out) == 0
    ds = load_dataset(str(out / "dataset.csv"))
    w = ds.w[ds.is_exp]
    assert abs(np.mean(w) - 0.5) < 3 * np.sqrt(0.25 / 1000)


def test_cmd_simulate_seed_flag_overrides(tmp_path):
    cfg = write_config(tmp_path, simulate_config(seed=7))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run(tmp_path, "simulate", "--config", cfg, "--out", out1, "--seed", 99)
    run(tmp_path, "simulate", "--config", cfg, "--out", out2)
    assert (out1 / "dataset.csv").read_text() != (out2 / "dataset.csv").read_text()


# ---------------------------------------------------------------------------
# oracle curve
# ---------------------------------------------------------------------------


def test_cmd_oracle_curve_files(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "oracle_curve": {
                "families": ["gaussian", "gumbel"],
                "rho_values": [0.5],
                "grid": [-0.5, 0.0, 0.5],
            }
        },
    )
    out = tmp_path / "curves"
    assert run(tmp_path, "oracle-curve", "--config", cfg, "--out", out) == 0
    gauss = list(csv.DictReader(open(out / "oracle_curve_gaussian_rho0.5.csv")))
    taus = [float(r["tau_k"]) for r in gauss]
    ates = [float(r["ate"]) for r in gauss]
    assert taus == [-0.5, 0.0, 0.5]
    assert ates[1] == pytest.approx(1.0, abs=1e-3)
    assert ates[0] < ates[1] < ates[2]
    gum = list(csv.DictReader(open(out / "oracle_curve_gumbel_rho0.5.csv")))
    assert all(float(r["tau_k"]) >= 0.0 for r in gum)


# ---------------------------------------------------------------------------
# estimation commands
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sim_data(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("data")
    cfg = write_config(tmp, simulate_config(n=1200, seed=3))
    out = tmp / "sim"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    return out / "dataset.csv"


def test_cmd_estimate_runs_and_validates(tmp_path, sim_data):
    cfg = write_config(
        tmp_path,
        {"seed": 5, "folds": 2, "copula": {"family": "gaussian", "tau": 0.25}},
    )
    out = tmp_path / "est"
    assert run(tmp_path, "estimate", "--config", cfg, "--data", sim_data, "--out", out) == 0
    rep = json.loads((out / "estimate_report.json").read_text())
    assert rep["schema"] == "surrosens.estimate_report.v1"
    assert rep["kind"] == "general"
    assert rep["copula"]["family"] == "gaussian"
    assert rep["se"]["tau"] > 0
    lo, hi = rep["wald_ci"]["tau"]
    assert lo < rep["tau"]["tau"] < hi


def test_cmd_estimate_rejects_frechet(tmp_path, sim_data):
    cfg = write_config(tmp_path, {"copula": {"family": "frechet_upper"}})
    code = run(tmp_path, "estimate", "--config", cfg, "--data", sim_data,
               "--out", tmp_path / "x")
    assert code == 2


def test_cmd_bounds_report_schema(tmp_path, sim_data):
    cfg = write_config(tmp_path, {"seed": 5, "folds": 2})
    out = tmp_path / "bounds"
    assert run(tmp_path, "bounds", "--config", cfg, "--data", sim_data, "--out", out) == 0
    rep = json.loads((out / "bounds_report.json").read_text())
    assert rep["kind"] == "bounds"
    assert rep["tau"]["lower"] <= rep["tau"]["upper"]
    assert len(rep["covariance"]) == 2
    assert rep["interval_ci"][0] <= rep["tau"]["lower"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert "bounds_report.json" in manifest["outputs"]


def test_cmd_sensitivity_small_grid(tmp_path, sim_data):
    cfg = write_config(
        tmp_path,
        {
            "seed": 5,
            "folds": 2,
            "family": "gaussian",
            "grid": [-0.25, 0.0, 0.25],
            "worst_case": False,
        },
    )
    out = tmp_path / "sens"
    assert run(tmp_path, "sensitivity", "--config", cfg, "--data", sim_data,
               "--out", out) == 0
    rows = list(csv.DictReader(open(out / "sensitivity_curve.csv")))
    assert [float(r["tau_k"]) for r in rows] == [-0.25, 0.0, 0.25]
    rep = json.loads((out / "sensitivity_report.json").read_text())
    assert rep["schema"] == "surrosens.sensitivity_curve.v1"


def test_cmd_sensitivity_grid_outside_family_range(tmp_path, sim_data):
    cfg = write_config(tmp_path, {"family": "gumbel", "grid": [-0.5, 0.5]})
    code = run(tmp_path, "sensitivity", "--config", cfg, "--data", sim_data,
               "--out", tmp_path / "x")
    assert code == 2


def test_missing_data_file_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"folds": 2})
    code = run(tmp_path, "bounds", "--config", cfg, "--data", tmp_path / "nope.csv",
               "--out", tmp_path / "x")
    assert code == 3


def test_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code = run(tmp_path, "simulate", "--config", p, "--out", tmp_path / "x")
    assert code == 2


def test_complete_data_split(tmp_path):
    rng = np.random.default_rng(0)
    n = 60
    rows = ["w,y,s1,x1"]
    for i in range(n):
        rows.append(f"{int(rng.uniform() < 0.5)},{rng.normal():.6f},"
                    f"{rng.normal():.6f},{rng.uniform():.6f}")
    p = tmp_path / "complete.csv"
    p.write_text("\n".join(rows) + "\n")
    # tiny sample: the forest needs more rows, so use the knn fallback
    cfg = write_config(
        tmp_path,
        {"seed": 5, "folds": 2,
         "learners": {"quantile_learner": "knn", "knn": {"k": 8}}},
    )
    out = tmp_path / "b"
    code = run(tmp_path, "bounds", "--config", cfg, "--complete-data", p,
               "--split-seed", 1, "--out", out)
    assert code == 0
    rep = json.loads((out / "bounds_report.json").read_text())
    assert rep["n"] == n


def test_cmd_estimate_with_nuisance_dump(tmp_path, sim_data):
    cfg = write_config(
        tmp_path, {"seed": 5, "folds": 2, "copula": {"family": "independence"}}
    )
    out = tmp_path / "dump"
    code = run(tmp_path, "estimate", "--config", cfg, "--data", sim_data,
               "--out", out, "--dump-nuisances")
    assert code == 0
    rows = list(csv.DictReader(open(out / "nuisances.csv")))
    ds = load_dataset(str(sim_data))
    assert len(rows) == ds.n_rows
    assert {"row", "fold", "rho_x", "rho_sx", "phi_sx", "phi"} <= set(rows[0])
    assert any(k.endswith(".mu1") for k in rows[0])
    est = list(csv.DictReader(open(out / "estimate_report.csv")))
    assert est[0]["target"] == "tau"
    manifest = json.loads((out / "manifest.json").read_text())
    assert "nuisances.csv" in manifest["outputs"]


def test_cmd_oracle_curve_threads_flag(tmp_path):
    cfg = write_config(
        tmp_path,
        {"oracle_curve": {"families": ["gaussian"], "rho_values": [0.5],
                          "grid": [-0.25, 0.0, 0.25]}},
    )
    out = tmp_path / "tcurve"
    assert run(tmp_path, "oracle-curve", "--config", cfg, "--out", out,
               "--threads", 2) == 0
    rows = list(csv.DictReader(open(out / "oracle_curve_gaussian_rho0.5.csv")))
    assert len(rows) == 3
