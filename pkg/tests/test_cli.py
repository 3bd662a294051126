import csv
import json
from pathlib import Path

import numpy as np
import pytest

from unalse.cli import main
from unalse.io import read_estimate, read_truth, strip_volatile
from unalse.periodogram import smoothed_periodogram
from unalse.solver import SolverConfig, alse_solve
from unalse.unshrink import unshrink


def _files(d: Path) -> dict:
    out = {}
    for f in sorted(d.rglob("*")):
        if f.is_file():
            data = f.read_bytes()
            if f.name == "manifest.json":
                data = json.dumps(strip_volatile(json.loads(data)), sort_keys=True).encode()
            out[str(f.relative_to(d))] = data
    return out


@pytest.fixture(scope="module")
def truth_root(tmp_path_factory):
    d = tmp_path_factory.mktemp("truth")
    assert main(["simulate", "--scenario", "A", "--setting", "desk", "--p", "8", "--T", "150",
                 "--reps", "2", "--seed", "7", "--out", str(d)]) == 0
    return d


def test_simulate_layout_and_determinism(truth_root, tmp_path):
    assert sorted(p.name for p in truth_root.iterdir()) == ["rep_000", "rep_001"]
    assert main(["simulate", "--scenario", "A", "--setting", "desk", "--p", "8", "--T", "150",
                 "--reps", "2", "--seed", "7", "--threads", "2", "--out", str(tmp_path)]) == 0
    assert _files(truth_root) == _files(tmp_path)
    a, b = read_truth(truth_root / "rep_000"), read_truth(truth_root / "rep_001")
    assert not np.array_equal(a.panel.values, b.panel.values)


def test_simulate_named_setting(tmp_path):
    assert main(["simulate", "--scenario", "B", "--setting", "3", "--T", "60", "--p", "12",
                 "--reps", "1", "--seed", "1", "--out", str(tmp_path)]) == 0
    cfg = read_truth(tmp_path / "rep_000").config
    assert cfg["scenario"] == "general" and cfg["r"] == 5


def test_estimate_csv_auto_select(tmp_path, rng):
    X = rng.standard_normal((6, 120))
    X[:3] += np.outer(np.ones(3), rng.standard_normal(120)) * 2
    f = tmp_path / "x.csv"
    np.savetxt(f, X, delimiter=",")
    out = tmp_path / "e"
    assert main(["estimate", "--input", str(f), "--kernel", "bartlett", "--bandwidth", "auto",
                 "--auto-select", "--grid", "12", "--grid-max", "2", "--out", str(out)]) == 0
    b = read_estimate(out)
    assert b.manifest["M_T"] == 10 and len(b.frequencies) == 3
    assert all(isinstance(r["rank"], int) for r in b.manifest["per_frequency"])
    assert b.manifest["mode"] == "auto_select"
    np.testing.assert_allclose(b.frequencies, np.pi * np.arange(3) / 12)


def test_manual_thresholds_reproduce_direct_run(truth_root, tmp_path):
    out = tmp_path / "e"
    assert main(["estimate", "--input", str(truth_root / "rep_000"), "--psi", "0.4", "--rho", "0.1",
                 "--kernel", "parzen", "--bandwidth", "9", "--out", str(out)]) == 0
    b = read_estimate(out)
    tr = read_truth(truth_root / "rep_000")
    sig = smoothed_periodogram(tr.panel, kernel="parzen", bandwidth=9, frequencies=tr.frequencies)
    for h, s in enumerate(sig):
        est = unshrink(alse_solve(s, SolverConfig(psi=0.4, rho=0.1)))
        np.testing.assert_array_equal(b.matrices["L"][h], est.L_u)
        np.testing.assert_array_equal(b.matrices["S"][h], est.S_u)
        np.testing.assert_array_equal(b.matrices["Sigma"][h], est.sigma_u)


def test_with_inverse(truth_root, tmp_path):
    out = tmp_path / "e"
    assert main(["estimate", "--input", str(truth_root / "rep_000"), "--psi", "0.4", "--rho", "0.1",
                 "--with-inverse", "--out", str(out)]) == 0
    b = read_estimate(out)
    for h, r in enumerate(b.manifest["per_frequency"]):
        inv = b.matrices["Sigma_inv"][h]
        if r["sigma_inv_ok"]:
            np.testing.assert_allclose(inv @ b.matrices["Sigma"][h], np.eye(8), atol=1e-8)
        else:
            assert np.isnan(inv).all()


def test_pipeline_evaluate_and_summary(truth_root, tmp_path):
    est = tmp_path / "e"
    assert main(["estimate", "--input", str(truth_root), "--out", str(est), "--n-thr", "4"]) == 0
    assert sorted(p.name for p in est.iterdir()) == ["rep_000", "rep_001"]
    rep = tmp_path / "r" / "report.json"
    assert main(["evaluate", "--estimates", str(est), "--truth", str(truth_root),
                 "--report", str(rep), "--csv-dir", str(tmp_path / "csv")]) == 0
    data = json.loads(rep.read_text())
    assert data["n_reps"] == 2 and 0 <= data["rank_correct"] <= 2
    assert len(data["metrics"]["err_ratio"]) == 6
    assert (tmp_path / "csv" / "rank_hat.csv").is_file()
    s = tmp_path / "s.csv"
    assert main(["summary", "--estimates", str(est / "rep_000"), "--out", str(s)]) == 0
    rows = list(csv.DictReader(open(s)))
    assert len(rows) == 6
    assert {"beta_hat", "zeta_hat", "nonzero_fraction", "eig1_over_p"} <= set(rows[0])


def test_threads_do_not_change_output(truth_root, tmp_path):
    args = ["estimate", "--input", str(truth_root), "--n-thr", "3", "--seed", "3"]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--threads", "3", "--out", str(tmp_path / "b")]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("UNALSE_THREADS", "3")
    from unalse.cli import build_parser

    assert build_parser().parse_args(["estimate", "--input", "x", "--out", "y"]).threads == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["estimate", "--input", "x.csv", "--out", "o", "--psi", "1"],
        ["estimate", "--input", "x.csv", "--out", "o", "--psi", "1", "--rho", "1", "--auto-select"],
        ["estimate", "--input", "x.csv", "--out", "o", "--bandwidth", "wide"],
        ["estimate", "--input", "x.csv", "--out", "o", "--demean", "maybe"],
        ["simulate", "--scenario", "Z", "--out", "o"],
        ["frobnicate"],
    ],
)
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "x.csv").write_text("1,2,3\n4,5,6\n")
    assert main(argv) == 2


def test_parse_error_exit_code(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1,2\n3,abc\n")
    assert main(["estimate", "--input", str(f), "--out", str(tmp_path / "o")]) == 3
    assert main(["estimate", "--input", str(tmp_path / "nothing"), "--out", str(tmp_path / "o")]) == 3
    assert main(["summary", "--estimates", str(tmp_path), "--out", str(tmp_path / "s.csv")]) == 3


def test_strict_non_convergence(truth_root, tmp_path):
    args = ["estimate", "--input", str(truth_root / "rep_000"), "--psi", "0.01", "--rho", "0.001",
            "--max-iterations", "1", "--out", str(tmp_path / "o")]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 4
