import json
import logging
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from data_models.kinetic_system import SystemSpec
from data_utils.serialization import write_json
from kinetic_tools.errors import InvalidSpecError

logger = logging.getLogger(__name__)


def parse_system_spec(document: dict) -> SystemSpec:
    """Validate a SystemSpec document; malformed fields become InvalidSpecError."""
    try:
        return SystemSpec.model_validate(document)
    except ValidationError as exc:
        raise InvalidSpecError(f"invalid system spec: {exc}") from exc


def load_system_spec(path: Union[str, Path]) -> SystemSpec:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InvalidSpecError(f"spec file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"spec file {path} is not valid JSON: {exc}") from exc
    spec = parse_system_spec(document)
    logger.info("Loaded system spec | kappa=%d | beta=%s | N=%d", spec.kappa, spec.beta, spec.N)
    return spec


def dump_system_spec(spec: SystemSpec, path: Union[str, Path]) -> Path:
    return write_json(path, spec.to_document())
