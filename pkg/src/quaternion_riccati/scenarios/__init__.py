"""Scenario catalog and runner."""

import json
import logging
from importlib import resources
from typing import Any, Dict, List, Tuple

from quaternion_riccati.errors import SchemaError
from quaternion_riccati.models import Scenario, parse_scenario
from quaternion_riccati.scenarios.runner import run_scenario

logger = logging.getLogger(__name__)

__all__ = ["builtin_names", "catalog", "load_builtin", "builtin_config", "run_scenario"]


def _builtin_files():
    folder = resources.files(__name__).joinpath("builtin")
    return sorted(
        (entry for entry in folder.iterdir() if entry.name.endswith(".json")),
        key=lambda entry: entry.name,
    )


def builtin_names() -> List[str]:
    return [entry.name[: -len(".json")] for entry in _builtin_files()]


def builtin_config(name: str) -> Dict[str, Any]:
    """Raw configuration tree of a builtin scenario."""
    for entry in _builtin_files():
        if entry.name == f"{name}.json":
            return json.loads(entry.read_text(encoding="utf-8"))
    raise SchemaError(
        f"unknown builtin '{name}', choose one of {', '.join(builtin_names())}",
        path="name",
    )


def load_builtin(name: str) -> Scenario:
    return parse_scenario(builtin_config(name))


def catalog() -> List[Tuple[str, str]]:
    """``(name, reference)`` for every builtin scenario."""
    return [
        (name, builtin_config(name).get("reference", "")) for name in builtin_names()
    ]
