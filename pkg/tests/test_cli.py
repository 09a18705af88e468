"""
Command Line Tests.

Validates that:
1. measure prints validated records for probability and count tables
2. Flag conflicts exit 3, input errors exit 2
3. calibrate reports analytic deviation and the Q gap, and writes a manifest
4. pairwise writes pairwise.csv plus manifest.json
5. A study replays bit-identically with --verify
"""

import csv
import json

import pytest

from ldcanon.main import main

T1_PROBS = "0.375,0.125,0.125,0.375"

MSE_CONFIG = """\
kind = mse
prior_alpha = 1
sample_sizes = 20
replicates = 1000
seed = 3
estimators = ne, sne
measures = eta_1, dprime
"""

TOY = "m1\tm2\tm3\n0\t0\t1\n0\t0\t.\n1\t1\t0\n1\t1\t1\n0\t1\t0\n1\t0\t.\n"


def _records(capsys):
    return {r["measure"]: r for r in json.loads(capsys.readouterr().out)}


# ---------------------------
# measure
# ---------------------------

def test_measure_probs(capsys):
    assert main(["measure", "--probs", T1_PROBS, "--measures", "dprime,lambda,q,r,eta_1"]) == 0
    records = _records(capsys)
    assert records["dprime"]["value"] == pytest.approx(0.5)
    assert records["lambda"]["value"] == pytest.approx(9.0)
    assert records["q"]["value"] == pytest.approx(0.8)
    assert records["r"]["value"] == pytest.approx(0.5)
    assert 0.0 < records["eta_1"]["value"] < 1.0
    assert all(r["estimator"] == "exact" and r["defined"] for r in records.values())


def test_measure_probs_normalized_on_input(capsys):
    assert main(["measure", "--probs", "3,1,1,3", "--measures", "dprime"]) == 0
    assert _records(capsys)["dprime"]["value"] == pytest.approx(0.5)


def test_measure_counts_semi_naive(capsys):
    assert main(["measure", "--counts", "9,1,1,1", "--estimator", "sne", "--alpha", "0.5",
                 "--measures", "lambda"]) == 0
    record = _records(capsys)["lambda"]
    assert record["value"] == pytest.approx(19.0 / 3.0)
    assert record["estimator"] == "sne_0.5"


def test_measure_counts_naive_undefined(capsys):
    assert main(["measure", "--counts", "5,0,0,5", "--estimator", "ne", "--measures", "lambda,dprime"]) == 0
    records = _records(capsys)
    assert records["lambda"]["value"] is None
    assert records["lambda"]["defined"] is False
    assert records["dprime"]["value"] == pytest.approx(1.0)
    assert records["dprime"]["inflated"] is True


def test_measure_csv(capsys):
    assert main(["measure", "--probs", T1_PROBS, "--measures", "lambda", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "measure,estimator,value,defined,inflated,std_error"
    assert lines[1].startswith("lambda,exact,")


@pytest.mark.parametrize("argv, code", [
    (["measure", "--probs", T1_PROBS, "--counts", "1,1,1,1"], 3),
    (["measure"], 3),
    (["measure", "--probs", T1_PROBS, "--estimator", "ne"], 3),
    (["measure", "--counts", "1,2,3"], 2),
    (["measure", "--counts", "1,-2,3,4"], 2),
    (["measure", "--probs", "0.5,0.5,0,0"], 2),
    (["measure", "--counts", "3,1,1,3", "--estimator", "ve", "--measures", "r"], 3),
    (["measure", "--probs", T1_PROBS, "--measures", "kappa"], 2),
])
def test_measure_errors(argv, code, capsys):
    assert main(argv) == code
    assert "error:" in capsys.readouterr().err


# ---------------------------
# calibrate
# ---------------------------

def test_calibrate_q_gap(capsys):
    assert main(["calibrate", "--alpha", "2", "--report-q-gap"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["method"] == "quadrature"
    assert report["q_gap"] == pytest.approx(0.035, abs=0.005)


def test_calibrate_check_analytic(capsys):
    assert main(["calibrate", "--alpha", "1", "--check-analytic"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["check_method"] == "quadrature"
    assert report["max_deviation"] < 1e-6


def test_calibrate_check_analytic_needs_closed_form(capsys):
    assert main(["calibrate", "--alpha", "3", "--check-analytic"]) == 3


def test_calibrate_output_and_manifest(tmp_path, capsys):
    output = tmp_path / "eta_2.cal"
    assert main(["calibrate", "--alpha", "2", "--output", str(output)]) == 0
    assert json.loads(capsys.readouterr().out)["path"] == str(output)
    assert output.read_text().startswith("# ldcanon-calibration v1 alpha=2")
    manifest = json.loads((tmp_path / "eta_2.cal.manifest.json").read_text())
    assert manifest["command"] == "calibrate"
    assert list(manifest["outputs"]) == ["eta_2.cal"]

    assert main(["measure", "--probs", T1_PROBS, "--measures", "eta_2", "--calibration", str(output)]) == 0
    from_file = _records(capsys)["eta_2"]["value"]
    assert main(["measure", "--probs", T1_PROBS, "--measures", "eta_2"]) == 0
    assert from_file == pytest.approx(_records(capsys)["eta_2"]["value"], abs=1e-5)


# ---------------------------
# pairwise
# ---------------------------

def test_pairwise(tmp_path, capsys):
    hap = tmp_path / "toy.tsv"
    hap.write_text(TOY)
    out = tmp_path / "out"
    assert main(["pairwise", str(hap), "--out-dir", str(out), "--measure", "dprime", "--estimator", "ne"]) == 0
    with open(out / "pairwise.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert [(r["marker_i"], r["marker_j"]) for r in rows] == [("m1", "m2"), ("m1", "m3"), ("m2", "m3")]
    assert float(rows[0]["estimate"]) == pytest.approx(1.0 / 3.0)
    assert rows[1]["n_complete"] == "4"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "pairwise"
    assert str(hap) in manifest["inputs"]


def test_pairwise_unsupported_measure(tmp_path):
    hap = tmp_path / "toy.tsv"
    hap.write_text(TOY)
    assert main(["pairwise", str(hap), "--out-dir", str(tmp_path / "o"), "--measure", "q",
                 "--estimator", "ve"]) == 3


def test_pairwise_bad_file(tmp_path):
    hap = tmp_path / "bad.tsv"
    hap.write_text("m1\tm2\n0\t2\n")
    assert main(["pairwise", str(hap), "--out-dir", str(tmp_path / "o")]) == 2


# ---------------------------
# study + replay
# ---------------------------

def test_study_and_replay(tmp_path, capsys):
    config = tmp_path / "mse.conf"
    config.write_text(MSE_CONFIG)
    out = tmp_path / "study"
    assert main(["study", "mse", str(config), "--out-dir", str(out)]) == 0
    assert (out / "mse.csv").exists()
    assert (out / "mse.json").exists()
    assert not (out / "FAILED").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert set(manifest["outputs"]) == {"mse.csv", "mse.json"}

    assert main(["replay", str(out / "manifest.json"), "--verify", "--threads", "2"]) == 0
    assert "bit-identical" in capsys.readouterr().err


def test_replay_detects_changed_input(tmp_path):
    config = tmp_path / "mse.conf"
    config.write_text(MSE_CONFIG)
    out = tmp_path / "study"
    assert main(["study", "mse", str(config), "--out-dir", str(out)]) == 0
    config.write_text(MSE_CONFIG.replace("seed = 3", "seed = 4"))
    assert main(["replay", str(out / "manifest.json")]) == 2


def test_study_bad_config(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("kind = mse\nprior_alpha = -1\n")
    assert main(["study", "mse", str(config), "--out-dir", str(tmp_path / "o")]) == 2


def test_study_kind_conflict(tmp_path):
    config = tmp_path / "mse.conf"
    config.write_text(MSE_CONFIG)
    assert main(["study", "kendall", str(config), "--out-dir", str(tmp_path / "o")]) == 2
