import logging
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Generator, Iterable, List, Sequence, Union

from pydantic import ValidationError

from data_models.reports import RunManifest
from data_utils.serialization import write_csv, write_json
from kinetic_tools.errors import KineticError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, KineticError):
        return exc.exit_code
    if isinstance(exc, ValidationError):
        return 2
    return 1


class RunOutputs:
    """Artefact writer bound to one output directory; records every file it writes."""

    def __init__(self, out_dir: Union[str, Path], manifest: RunManifest):
        self.out_dir = Path(out_dir)
        self.manifest = manifest
        self.artefacts: List[str] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_json(self, name: str, payload: Any) -> Path:
        path = write_json(self.path(name), payload)
        self.artefacts.append(name)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = write_csv(self.path(name), header, rows)
        self.artefacts.append(name)
        return path


@contextmanager
def get_run_context(out_dir: Union[str, Path], manifest: RunManifest) -> Generator[RunOutputs, None, None]:
    """
    Context manager for one CLI run. The manifest is written on exit
    whether the body succeeded or raised.

    Usage:
        with get_run_context(out_dir, manifest) as outputs:
            outputs.write_csv("trajectory.csv", header, rows)
    """
    outputs = RunOutputs(out_dir, manifest)
    outputs.out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    try:
        yield outputs
        manifest.status = "completed"
        manifest.exit_code = 0
    except Exception as exc:
        manifest.status = "failed"
        manifest.exit_code = exit_code_for(exc)
        manifest.error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest.finished_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        manifest.wall_time_seconds = time.perf_counter() - started
        manifest.artefacts = list(outputs.artefacts)
        write_json(outputs.path(MANIFEST_NAME), manifest.model_dump())
        logger.info("Run manifest written to %s", outputs.path(MANIFEST_NAME))
