"""The thirteen acceptance criteria, one test each.

Every test prints a single PASS/FAIL line (outside pytest's capture) and then
asserts the stated threshold on the raw numbers, not only on the row's flag.
"""

import os

import pytest

from hardylab import acceptance
from hardylab.cli import main

CONFIG = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "interval.json")


@pytest.fixture
def report(capsys):
    def emit(row):
        with capsys.disabled():
            print("\n" + row.line())
        return row
    return emit


def test_criterion_01_luxemburg_reduction(report):
    row = report(acceptance.luxemburg_reduction())
    assert row.details["max_rel_error"] < 1e-8
    assert row.passed


def test_criterion_02_modular_bracket(report):
    row = report(acceptance.modular_bracket())
    assert row.details["violations"] == 0
    assert row.passed


def test_criterion_03_kernel_cancellation(report):
    row = report(acceptance.kernel_cancellation())
    assert len(row.details["rows"]) == 12
    for r in row.details["rows"]:
        assert r["residual"] < 1e-3
        assert r["residual_refined"] < r["residual"] or max(r["residual"], r["residual_refined"]) <= r["floor"]
    assert row.passed


def test_criterion_04_kernel_decay(report):
    row = report(acceptance.kernel_decay())
    for r in row.details["rows"]:
        assert abs(r["slope"] - r["target"]) <= 0.05
    assert row.passed


def test_criterion_05_weight_upper_bound(report):
    row = report(acceptance.weight_upper_bound())
    assert {r["domain"] for r in row.details["rows"]} == {"interval", "disk", "square"}
    assert all(r["c1_ratio"] <= 1.02 for r in row.details["rows"])
    assert row.details["closed_form_rel"] <= 1e-4
    assert row.passed


def test_criterion_06_weight_lower_bound(report):
    row = report(acceptance.weight_lower_bound())
    for r in row.details["rows"]:
        assert r["change"] <= 0.10
    assert row.passed


def test_criterion_07_inversion(report):
    row = report(acceptance.inversion())
    e1, e2 = row.details["errors_1d"], row.details["errors_2d"]
    assert e1[-1] < 0.05
    assert e1[0] > e1[1] > e1[2]
    assert e2[-1] < 0.10
    assert row.passed


def test_criterion_08_calibration(report):
    row = report(acceptance.calibration_stability())
    assert len(row.details["rows"]) == 6
    assert all(r["drift"] < 0.01 for r in row.details["rows"])
    assert row.passed


def test_criterion_09_decomposition(report):
    row = report(acceptance.decomposition())
    r2048, r4096 = row.details["relative"]
    assert r2048 < 1e-2
    assert r4096 <= r2048 / 2
    assert row.passed


def test_criterion_10_domination(report):
    row = report(acceptance.domination())
    for r in row.details["rows"]:
        assert abs(r["C_extended"] - r["C_est"]) <= 0.10 * r["C_est"]
    assert row.passed


def test_criterion_11_co_movement(report):
    row = report(acceptance.co_movement_check())
    assert [r["domain"] for r in row.details["rows"]] == ["interval", "disk", "square"]
    for r in row.details["rows"]:
        assert max(r["change"].values()) <= 0.20
        assert not r["cross_flag"]
    assert row.passed


def test_criterion_12_strichartz(report):
    row = report(acceptance.strichartz())
    for r in row.details["rows"]:
        assert r["finite"] and r["change"] <= 0.20
    assert row.details["rows"][1]["strichartz_N"] == 2
    assert row.passed


def test_criterion_13_determinism(report, tmp_path, capsys):
    blobs = []
    for w in ("1", "2", "max"):
        out = tmp_path / f"workers-{w}"
        with capsys.disabled():
            code = main(["report-all", "--config", CONFIG, "--out", str(out), "--workers", w])
        assert code == 0, "report-all must pass every criterion on the interval config"
        blobs.append((out / "summary.csv").read_bytes())
    same = blobs[0] == blobs[1] == blobs[2]
    row = acceptance.Criterion(13, "report-all byte-identical at 1, 2, max workers",
                               f"identical={same}", "byte-identical", same, {})
    report(row)
    assert same
    assert len(blobs[0].decode().splitlines()) == 14
