import json
import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from data_models.reports import RunManifest
from data_utils.random_streams import named_stream, spawn_seeds, spawn_streams
from data_utils.run_context import MANIFEST_NAME, exit_code_for, get_run_context
from data_utils.serialization import dumps_json, format_float, read_csv, write_csv
from data_utils.settings import KineticSettings
from kinetic_tools.errors import CFLViolationError, InvalidSpecError, UnsupportedModeError


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("KINETIC_CFL_LIMIT", "0.5")
    monkeypatch.setenv("KINETIC_SOLUTION_METHOD", "min-norm")
    settings = KineticSettings()
    assert settings.CFL_LIMIT == 0.5
    assert settings.SOLUTION_METHOD == "min-norm"


def test_settings_reject_bad_values():
    with pytest.raises(ValidationError):
        KineticSettings(LOG_SPACE_KAPPA=0)
    with pytest.raises(ValueError):
        KineticSettings(SLOPE_WINDOW_LO=1e-2, SLOPE_WINDOW_HI=1e-3).slope_window()


def test_named_streams_are_independent_and_stable():
    a = named_stream(1, "alpha").standard_normal(4)
    assert np.array_equal(a, named_stream(1, "alpha").standard_normal(4))
    assert not np.array_equal(a, named_stream(1, "beta").standard_normal(4))
    assert not np.array_equal(a, named_stream(2, "alpha").standard_normal(4))
    with pytest.raises(ValueError):
        named_stream(-1, "alpha")


def test_spawned_children_are_prefix_stable():
    first = [g.standard_normal() for g in spawn_streams(3, "chunks", 2)]
    more = [g.standard_normal() for g in spawn_streams(3, "chunks", 4)]
    assert first == more[:2]
    assert spawn_seeds(3, "runs", 3) == spawn_seeds(3, "runs", 3)


def test_float_formatting_round_trips():
    for value in (0.1, 1.0 / 3.0, -2.5e-17, 12345.678):
        assert float(format_float(value)) == value
    assert format_float(float("inf")) == "inf"
    assert json.loads(dumps_json({"x": np.array([1.5, np.nan])})) == {"x": [1.5, "nan"]}


def test_csv_writer(tmp_path):
    path = write_csv(tmp_path / "out" / "table.csv", ["a", "b", "c"], [[1, 0.25, None], [np.int64(2), np.float64(1e-3), "z"]])
    assert read_csv(path) == [["a", "b", "c"], ["1", "0.25", ""], ["2", "0.001", "z"]]


def test_exit_codes():
    assert exit_code_for(InvalidSpecError("x")) == 2
    assert exit_code_for(CFLViolationError("x", suggested_dt=0.1)) == 1
    assert exit_code_for(UnsupportedModeError("x")) == 3
    assert exit_code_for(RuntimeError("x")) == 1


def test_run_context_writes_manifest_on_failure(tmp_path):
    manifest = RunManifest(tool="t", version="0", command="solve")
    with pytest.raises(UnsupportedModeError):
        with get_run_context(tmp_path, manifest) as outputs:
            outputs.write_json("partial.json", {"ok": True})
            raise UnsupportedModeError("beta < 1")
    record = json.loads((tmp_path / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert record["status"] == "failed"
    assert record["exit_code"] == 3
    assert record["artefacts"] == ["partial.json"]
    assert record["wall_time_seconds"] >= 0.0
