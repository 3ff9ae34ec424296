"""Experiment config files: strict JSON schema, bundled configs, overrides."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from .experiment import THEOREMS

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}

PARAMS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "w0": _pos_int,
        "b0": _num,
        "a": {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2}]},
        "b": _num,
        "k": _pos_int,
        "c": {"type": "number", "exclusiveMinimum": 0},
        "q": {"type": "number", "exclusiveMinimum": 0},
        "r": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "inf"}]},
        "s": {"type": "integer", "minimum": 0},
        "theta1": _num,
        "theta2": _num,
        "g": {"oneOf": [{"const": "sqrt"}, {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}]},
        "box": _pos_int,
        "band": {"type": "number", "exclusiveMinimum": 0},
    },
}

CHECK_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["id", "metric"],
    "properties": {
        "id": {"type": "string"},
        "description": {"type": "string"},
        "metric": {"type": "string"},
        "max": _num,
        "min": _num,
        "decreasing": {"type": "boolean"},
        "soft": {"type": "boolean"},
        "m": _pos_int,
        "t": {"type": ["number", "null"]},
    },
    "anyOf": [{"required": ["max"]}, {"required": ["min"]}, {"required": ["decreasing"]}],
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["theorem", "params", "m_grid", "replicates", "checkpoints", "seed"],
    "properties": {
        "theorem": {"enum": sorted(THEOREMS)},
        "params": PARAMS_SCHEMA,
        "m_grid": {"type": "array", "items": _pos_int, "minItems": 1},
        "replicates": {"type": "integer", "minimum": 2},
        "checkpoints": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "seed": {"type": "integer", "minimum": 0},
        "checks": {"type": "array", "items": CHECK_SCHEMA},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"json": {"type": "string"}, "csv": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    pass


def bundled_configs() -> list[str]:
    return sorted(p.name for p in resources.files("urnlimits.configs").iterdir() if p.name.endswith(".json"))


def read_config(path: str) -> dict:
    """Load ``path``, falling back to a bundled config of that name."""
    p = Path(path)
    try:
        if p.exists():
            text = p.read_text()
        elif p.name in bundled_configs():
            text = resources.files("urnlimits.configs").joinpath(p.name).read_text()
        else:
            raise ConfigError(f"config not found: {path} (bundled: {', '.join(bundled_configs())})")
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    validate(cfg, path)
    return cfg


def validate(cfg: dict, where: str = "config") -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        loc = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {loc}: {e.message}") from e
