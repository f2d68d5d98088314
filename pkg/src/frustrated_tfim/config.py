"""Experiment configuration: JSON documents checked against a versioned schema."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

SCHEMA_VERSION = 1
SCENARIOS = ("ed", "vqe", "vqd", "gap", "krylov", "scan", "corr", "depth-scan", "gradnorm")
KINDS = ("hva", "bond_hva", "hea")

_OPTIMIZER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "method": {"enum": ["lbfgs", "slsqp", "nelder-mead", "cobyla",
                            "quasi_newton", "derivative_free"]},
        "max_iter": {"type": "integer", "minimum": 1},
        "gradient_tol": {"type": "number", "exclusiveMinimum": 0},
        "restarts": {"type": "integer", "minimum": 1},
        "init_scale": {"type": "number", "minimum": 0},
        "zero_start": {"type": "boolean"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "scenario", "lattice", "h_values"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "scenario": {"enum": list(SCENARIOS)},
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L"],
            "properties": {
                "L": {"type": "integer", "minimum": 2, "maximum": 5},
                "frustrated": {"type": "boolean"},
                "coupling": {"enum": ["afm", "fm"]},
            },
        },
        "h_values": {"type": "array", "minItems": 1,
                     "items": {"type": "number", "minimum": 0}},
        "ansatz": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kinds": {"type": "array", "minItems": 1, "items": {"enum": list(KINDS)}},
                "p_values": {"type": "array", "minItems": 1,
                             "items": {"type": "integer", "minimum": 1}},
                "sector": {"enum": ["even", "odd", "none"]},
            },
        },
        "optimizer": _OPTIMIZER,
        "vqd": {
            "type": "object",
            "additionalProperties": False,
            "required": ["beta"],
            "properties": {
                "beta": {"oneOf": [
                    {"type": "number", "minimum": 0},
                    {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                ]},
            },
        },
        "depth_scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "target": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "p_max": {"type": "integer", "minimum": 1},
            },
        },
        "krylov": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dimension": {"type": "integer", "minimum": 1},
                "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "precision": {"enum": ["double", "single"]},
                "n_classical": {"type": "integer", "minimum": 0},
            },
        },
        "reference": {"enum": ["auto", "dense", "lanczos", "krylov", "none"]},
        "n_eigenvalues": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "resources": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "memory_budget": {"type": "number", "exclusiveMinimum": 0},
                "allow_large": {"type": "boolean"},
                "jobs": {"type": "integer", "minimum": 1},
            },
        },
    },
    "allOf": [
        {"if": {"properties": {"scenario": {"const": "vqd"}}},
         "then": {"required": ["vqd"]}},
    ],
}

DEFAULTS = {
    "name": "",
    "lattice": {"frustrated": True, "coupling": "afm"},
    "ansatz": {"kinds": ["bond_hva"], "p_values": [8]},
    "optimizer": {"method": "lbfgs", "max_iter": 1000, "gradient_tol": 1e-7, "restarts": 10,
                  "init_scale": 0.1, "zero_start": True},
    "depth_scan": {"target": 0.99, "p_max": 28},
    "krylov": {"dimension": 96, "precision": "double", "n_classical": 4},
    "reference": "auto",
    "n_eigenvalues": 4,
    "seed": 0,
    "output_dir": "",
    "resources": {"memory_budget": 4e9, "allow_large": False, "jobs": 1},
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def schema_errors(doc) -> list[str]:
    """Every schema violation, as 'path: message' strings (empty when valid)."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        msg = err.message
        if err.validator == "required":
            missing = [p for p in err.validator_value if p not in err.instance]
            msg = f"missing required field {', '.join(repr(m) for m in missing)}"
            if err.schema is not SCHEMA and where == "<root>":
                msg += f" (needed by scenario {doc.get('scenario')!r})"
        out.append(f"{where}: {msg}")
    return out


def load_document(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror or exc}"]) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc


def validate_config(path) -> list[str]:
    """Schema errors for the config file at ``path`` (empty list means ok)."""
    return schema_errors(load_document(path))


def with_defaults(doc: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, val in doc.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **val}
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, doc: dict | None = None) -> dict:
    """Validated config with defaults filled in; raises ConfigError listing all problems."""
    if doc is None:
        doc = load_document(path)
    errors = schema_errors(doc)
    if errors:
        raise ConfigError(errors)
    return with_defaults(doc)
