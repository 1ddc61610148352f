import copy
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from metric_estimands.config import settings
from metric_estimands.exceptions import ConfigurationError, DomainError
from metric_estimands.simulator import Scenario, builtin_scenario

logger = logging.getLogger(__name__)

GRID_PATTERN = re.compile(r"^\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*$")


def parse_grid(text: str) -> np.ndarray:
    """Inclusive grid from "start:stop:step", e.g. "0:21:0.5" """
    match = GRID_PATTERN.match(text)
    if not match:
        raise DomainError(f"Grid must look like start:stop:step, got '{text}'")
    try:
        start, stop, step = (float(part) for part in match.groups())
    except ValueError:
        raise DomainError(f"Grid bounds must be numbers, got '{text}'") from None
    if step <= 0:
        raise DomainError("Grid step must be positive", diagnostics={"step": step})
    if stop < start:
        raise DomainError("Grid stop must not precede its start", diagnostics={"grid": text})
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 10)


class OutputBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = Field(None, description="Where the command writes its CSV")
    grid: Optional[str] = Field(None, description="Analysis times as start:stop:step")

    @field_validator("grid")
    @classmethod
    def validate_grid(cls, v):
        """Grid must parse to at least one time"""
        if v is not None:
            parse_grid(v)
        return v


class ScenarioConfig(Scenario):
    """JSON scenario document: a simulator scenario plus its name and output block"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field("custom", max_length=100)
    replications: int = Field(settings.desk_replications, ge=1)
    output: OutputBlock = Field(default_factory=OutputBlock)

    def grid(self) -> np.ndarray:
        if self.output.grid:
            return parse_grid(self.output.grid)
        return np.arange(0, self.horizon_days + 1, dtype=float)


def _set_path(document: Any, keys: List[str], value: Any, dotted: str) -> None:
    target = document
    for position, key in enumerate(keys):
        last = position == len(keys) - 1
        if isinstance(target, list):
            if not re.match(r"^\d+$", key) or int(key) >= len(target):
                raise ConfigurationError(f"Override '{dotted}' indexes past a list")
            key = int(key)
        elif not isinstance(target, dict):
            raise ConfigurationError(f"Override '{dotted}' descends into a scalar")
        if last:
            target[key] = value
        else:
            if isinstance(target, dict) and key not in target:
                target[key] = {}
            target = target[key]


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply `key.path=value` overrides to a config document. Values are parsed as
    JSON when possible (numbers, booleans, objects) and kept as strings otherwise.
    """
    result = copy.deepcopy(document)
    for override in overrides:
        if "=" not in override:
            raise ConfigurationError(f"Override must be key=value, got '{override}'")
        dotted, raw = override.split("=", 1)
        dotted = dotted.strip()
        if not dotted:
            raise ConfigurationError(f"Override has an empty key: '{override}'")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(result, dotted.split("."), value, dotted)
        logger.debug(f"Override {dotted} = {value!r}")
    return result


def builtin_document(name: str, full_fidelity: bool = False) -> Dict[str, Any]:
    """JSON document for a built-in scenario at desk or full replication scale"""
    scenario = builtin_scenario(name)
    document = scenario.model_dump(mode="json", by_alias=True)
    document["name"] = name
    if name != "fig3":
        document["replications"] = (
            settings.full_replications if full_fidelity else settings.desk_replications
        )
    return document


def load_config(
    path: Optional[Union[str, Path]] = None,
    builtin: Optional[str] = None,
    overrides: Sequence[str] = (),
    full_fidelity: bool = False,
) -> ScenarioConfig:
    """Read a config file or built-in scenario, apply overrides and validate"""
    if path is not None and builtin is not None:
        raise ConfigurationError("Use either a config file or a built-in scenario, not both")
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            try:
                document = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(
                    f"Config is not valid JSON: {exc.msg}",
                    diagnostics={"path": str(path), "line": exc.lineno},
                ) from None
        if not isinstance(document, dict):
            raise ConfigurationError("Config must be a JSON object", diagnostics={"path": str(path)})
    elif builtin is not None:
        document = builtin_document(builtin, full_fidelity)
    else:
        raise ConfigurationError("A config file (--config) or built-in scenario (--builtin) is required")

    config = ScenarioConfig.model_validate(apply_overrides(document, overrides))
    logger.info(f"Loaded scenario '{config.name}' ({config.n_users} users, {config.horizon_days} days)")
    return config
