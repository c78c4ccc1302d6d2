"""
Model configuration documents.

A configuration is a JSON object:

    {"n_cells": 2, "alpha": "2/5",
     "types": [{"a": "3/7", "p": "3/5", "beta": "3/10"},
               {"a": "4/7", "p": "4/5", "beta": "2/5"}]}

Probabilities may be numbers or exact rational strings.
"""

import logging
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from src.lattice.errors import ConfigError
from src.lattice.model import SystemParams

logger = logging.getLogger(__name__)


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "<document>"
    return f"{location}: {first['msg']}"


def parse_params(data: dict[str, Any]) -> SystemParams:
    """Build SystemParams from an already-decoded mapping."""
    try:
        return SystemParams.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_describe(e)}")


def parse_params_json(text: str) -> SystemParams:
    """Build SystemParams from JSON text."""
    try:
        return SystemParams.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_describe(e)}")


def load_params(path: str | Path) -> SystemParams:
    """
    Read and parse a configuration file.

    Raises:
        ConfigError: if the file is missing or does not match the schema
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}", "CONFIG_NOT_FOUND")
    params = parse_params_json(text)
    logger.info(f"Loaded config {path}: N={params.n_cells}, K={params.n_types}")
    return params


def config_schema() -> dict[str, Any]:
    """JSON schema of the configuration document."""
    return SystemParams.model_json_schema(by_alias=True)
