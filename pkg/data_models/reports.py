"""Result records written by the verifier and the CLI."""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Any, ClassVar, Dict, List, Optional

from pydantic import BaseModel, Field

from data_models.base import FrozenModel


class PoincareReport(FrozenModel):
    lhs: float
    rhs: float
    ratio: Optional[float] = None
    ratio_defined: bool = False
    p: float = 1.0
    geometry: Dict[str, Any] = Field(default_factory=dict)
    provenance: Dict[str, Any] = Field(default_factory=dict)

    def csv_row(self) -> list:
        prov = self.provenance
        return [
            prov.get("run_id", ""),
            prov.get("seed", ""),
            prov.get("lambda", ""),
            self.p,
            prov.get("grid", ""),
            self.lhs,
            self.rhs,
            self.ratio if self.ratio_defined else "",
        ]

    CSV_HEADER: ClassVar[List[str]] = ["run_id", "seed", "lambda", "p", "grid", "lhs", "rhs", "ratio"]


class EnsembleSummary(FrozenModel):
    n_runs: int
    n_completed: int
    n_failed: int
    n_undefined_ratio: int
    max_ratio: Optional[float] = None
    median_ratio: Optional[float] = None
    flagged_runs: List[int] = Field(default_factory=list)
    failures: Dict[int, str] = Field(default_factory=dict)


class RunManifest(BaseModel):
    """
    Provenance record of one CLI invocation. This is the only artefact that
    carries wall-clock data.
    """

    tool: str
    version: str
    command: str
    arguments: Dict[str, Any] = Field(default_factory=dict)
    spec: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None
    started_at: str = Field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    finished_at: Optional[str] = None
    wall_time_seconds: Optional[float] = None
    status: str = "running"
    exit_code: Optional[int] = None
    error: Optional[str] = None
    artefacts: List[str] = Field(default_factory=list)
    details: Dict[str, Any] = Field(default_factory=dict)


class EnsembleResult(FrozenModel):
    """Per-run reports (completed runs, in run-id order) and their summary."""

    reports: List[PoincareReport]
    summary: EnsembleSummary
    wall_times: Dict[int, float] = Field(default_factory=dict)
