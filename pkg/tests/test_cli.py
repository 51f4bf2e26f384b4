import json
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from cli.app_factory import main
from data_models.kinetic_system import SystemSpec
from data_utils.run_context import MANIFEST_NAME
from data_utils.serialization import read_csv
from data_utils.spec_loader import dump_system_spec


def _manifest(out):
    return json.loads((out / MANIFEST_NAME).read_text(encoding="utf-8"))


def _lines(path):
    return path.read_text(encoding="utf-8").splitlines()


# =====================================================
# check-wronskian
# =====================================================
def test_check_wronskian_passes(tmp_path):
    out = tmp_path / "wronskian"
    assert main(["check-wronskian", "--trials", "3", "--seed", "5", "--out", str(out)]) == 0
    summary = json.loads((out / "wronskian_check.json").read_text(encoding="utf-8"))
    assert summary["passed"] is True
    assert summary["trials"] == 3
    assert len(_lines(out / "wronskian_check.csv")) == 1 + 3 * 4
    manifest = _manifest(out)
    assert manifest["status"] == "completed"
    assert manifest["exit_code"] == 0
    assert "wronskian_check.csv" in manifest["artefacts"]


def test_coincident_alphas_fail_numerically(tmp_path):
    out = tmp_path / "degenerate"
    assert main(["check-wronskian", "--alphas", "-0.5,-0.5", "--out", str(out)]) == 1
    manifest = _manifest(out)
    assert manifest["status"] == "failed"
    assert manifest["exit_code"] == 1
    assert "DegenerateBasisError" in manifest["error"]


# =====================================================
# trajectory
# =====================================================
def test_trajectory_from_endpoint_file(tmp_path):
    endpoints = tmp_path / "endpoints.json"
    # display order (x, v, t)
    endpoints.write_text(json.dumps({"endpoint": [-0.3, 0.4, -0.5], "target": [0.6, -0.2, -2.5]}))
    out = tmp_path / "trajectory"
    code = main([
        "trajectory", "--endpoints", str(endpoints), "--samples", "11",
        "--radius-samples", "3", "--out", str(out),
    ])
    assert code == 0
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["s", "t", "x0_0", "x1_0"]
    assert len(rows) == 12
    assert float(rows[-1][1]) == pytest.approx(-2.5)
    diagnostics = json.loads((out / "trajectory_diagnostics.json").read_text(encoding="utf-8"))
    assert diagnostics["endpoint_residual"] < 1e-9
    assert diagnostics["bounding_radius"]["n_samples"] == 3


def test_trajectory_output_is_byte_identical_per_seed(tmp_path):
    args = ["trajectory", "--samples", "21", "--radius-samples", "2", "--seed", "17"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trajectory.csv", "trajectory_diagnostics.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_malformed_endpoints_exit_2(tmp_path):
    endpoints = tmp_path / "endpoints.json"
    endpoints.write_text(json.dumps({"endpoint": [0.0, 0.0]}))
    out = tmp_path / "bad"
    assert main(["trajectory", "--endpoints", str(endpoints), "--out", str(out)]) == 2
    assert _manifest(out)["exit_code"] == 2


def test_missing_spec_exit_2(tmp_path):
    out = tmp_path / "nospec"
    assert main(["check-wronskian", "--spec", str(tmp_path / "missing.json"), "--out", str(out)]) == 2


def test_bad_usage_exit_2():
    assert main(["no-such-command"]) == 2


# =====================================================
# poincare
# =====================================================
def test_poincare_ensemble(tmp_path):
    out = tmp_path / "poincare"
    code = main([
        "poincare", "--radius", "2", "--cells", "16,32", "--runs", "5",
        "--lambda", "2", "--seed", "3", "--out", str(out),
    ])
    assert code == 0
    rows = read_csv(out / "summary.csv")
    assert rows[0] == ["run_id", "seed", "lambda", "p", "grid", "lhs", "rhs", "ratio"]
    assert len(rows) == 6
    assert all(row[4] == "16x32" for row in rows[1:])
    assert (out / "run_000.json").exists()
    summary = json.loads((out / "ensemble_summary.json").read_text(encoding="utf-8"))
    assert summary["summary"]["n_completed"] == 5
    assert set(_manifest(out)["details"]["run_wall_times"]) == {"0", "1", "2", "3", "4"}


def test_fractional_spec_is_unsupported(tmp_path):
    spec_path = dump_system_spec(SystemSpec.kolmogorov(beta=0.5), tmp_path / "fractional.json")
    out = tmp_path / "fractional"
    assert main(["poincare", "--spec", str(spec_path), "--runs", "1", "--out", str(out)]) == 3
    assert _manifest(out)["exit_code"] == 3


# =====================================================
# solve / simulate
# =====================================================
def test_solve_writes_grid_and_manifest(tmp_path):
    out = tmp_path / "solve"
    code = main([
        "solve", "--cells", "16,16", "--half-widths", "4,8", "--t-span", "0,0.5",
        "--preset", "checkerboard", "--lambda", "2", "--out", str(out),
    ])
    assert code == 0
    rows = read_csv(out / "grid.csv")
    assert rows[0] == ["x0_0", "x1_0", "t", "value"]
    assert len(rows) == 1 + 16 * 16
    assert all(float(row[2]) == 0.5 for row in rows[1:])
    record = json.loads((out / "solver_manifest.json").read_text(encoding="utf-8"))
    assert "elapsed_seconds" not in record
    assert record["cfl_number"] <= 1.0


def test_solve_with_unstable_step_exit_1(tmp_path):
    out = tmp_path / "unstable"
    code = main([
        "solve", "--cells", "16,16", "--half-widths", "4,8", "--t-span", "0,0.5",
        "--dt", "0.25", "--out", str(out),
    ])
    assert code == 1
    assert "CFLViolationError" in _manifest(out)["error"]


def test_simulate_reports_moments(tmp_path):
    out = tmp_path / "simulate"
    assert main(["simulate", "--paths", "2000", "--horizon", "1.0", "--out", str(out)]) == 0
    assert len(_lines(out / "terminal.csv")) == 2001
    moments = json.loads((out / "moments.json").read_text(encoding="utf-8"))
    assert moments["expected_covariance"][0][0] == pytest.approx(1.0)
    assert moments["layers"]["x0"]["covariance"][0][0] == pytest.approx(1.0, abs=0.15)
