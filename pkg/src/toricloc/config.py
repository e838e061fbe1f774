"""JSON configuration handling and atomic result persistence.

Configs are JSON documents validated against per-subcommand schemas with
field-path diagnostics. All physics knobs (disorder bounds and their
convention, beta rule, time grids) are explicit: there are no silent
defaults for physical parameters. Outputs are written atomically
(temp file + rename) and deterministically (sorted keys, shortest
round-trip float formatting).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile

import jsonschema


class ConfigError(ValueError):
    """Configuration that fails schema validation; lists field paths."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _positive_int(minimum=1):
    return {"type": "integer", "minimum": minimum}


_SEED = {"type": "integer", "minimum": 0}

EVOLVE_SCHEMA = {
    "type": "object",
    "required": ["L", "delta", "t_max", "n_defects", "hop", "realizations", "seed"],
    "additionalProperties": False,
    "properties": {
        "L": _positive_int(2),
        "delta": {"type": "number", "minimum": 0},
        "t_max": _positive_int(1),
        "n_defects": {"type": "integer", "enum": [1, 2]},
        "hop": {"type": "number"},
        "realizations": _positive_int(1),
        "seed": _SEED,
        "metric": {"type": "string", "enum": ["auto", "relative", "distance"]},
        "x0": {"type": "array"},
        "string": {
            "type": ["object", "null"],
            "required": ["from", "to"],
            "additionalProperties": False,
            "properties": {
                "from": {"type": "array", "items": {"type": "integer"}},
                "to": {"type": "array", "items": {"type": "integer"}},
                "waypoints": {"type": "array"},
            },
        },
        "propagator": {"type": "string", "enum": ["auto", "dense", "expm"]},
        "label": {"type": "string"},
    },
}

RELATIVE_SCHEMA = {
    "type": "object",
    "required": ["k", "box_radius", "hop", "packet", "region_halfwidth", "seed"],
    "additionalProperties": False,
    "properties": {
        "k": {"type": "array", "items": {"type": "number"}, "minItems": 2,
              "maxItems": 2},
        "box_radius": _positive_int(4),
        "hop": {"type": "number"},
        "inhomogeneity": {
            "type": ["object", "null"],
            "required": ["support_radius", "strength"],
            "additionalProperties": False,
            "properties": {
                "support_radius": _positive_int(1),
                "strength": {"type": "number"},
                "hop_range": _positive_int(1),
            },
        },
        "packet": {
            "type": "object",
            "required": ["center", "sigma", "q"],
            "additionalProperties": False,
            "properties": {
                "center": {"type": "array", "items": {"type": "number"}},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "q": {"type": "array", "items": {"type": "number"}},
            },
        },
        "region_halfwidth": _positive_int(1),
        "times": {"type": ["array", "null"], "items": {"type": "number"}},
        "n_times": _positive_int(2),
        "threshold": {"type": "number", "exclusiveMinimum": 0},
        "seed": _SEED,
        "label": {"type": "string"},
    },
}

DECODE_SCHEMA = {
    "type": "object",
    "required": ["L", "deltas", "t_readout", "trials", "hop", "seed"],
    "additionalProperties": False,
    "properties": {
        "L": _positive_int(2),
        "deltas": {"type": "array", "items": {"type": "number", "minimum": 0},
                   "minItems": 1},
        "t_readout": {"type": "number", "minimum": 0},
        "trials": _positive_int(1),
        "hop": {"type": "number"},
        "seed": _SEED,
        "label": {"type": "string"},
    },
}

_SWEEPS = {
    "type": "object",
    "required": ["thermalization", "measurement", "bins"],
    "additionalProperties": False,
    "properties": {
        "thermalization": _positive_int(0),
        "measurement": _positive_int(32),
        "bins": _positive_int(32),
    },
}

QMC_SCHEMA = {
    "type": "object",
    "required": ["L", "beta", "delta", "seed", "sweeps"],
    "additionalProperties": False,
    "properties": {
        "L": _positive_int(2),
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "mu": {"type": "number"},
        "density": {"type": "number", "exclusiveMinimum": 0,
                    "exclusiveMaximum": 1},
        "mu_tolerance": {"type": "number", "exclusiveMinimum": 0},
        "t": {"type": "number"},
        "seed": _SEED,
        "sweeps": _SWEEPS,
        "track_patterns": {"type": "boolean"},
        "checkpoint_every": _positive_int(0),
        "resume": {"type": "boolean"},
        "label": {"type": "string"},
    },
}

SCAN_SCHEMA = {
    "type": "object",
    "required": ["densities", "sizes", "beta_rule", "deltas", "realizations",
                 "seed", "sweeps"],
    "additionalProperties": False,
    "properties": {
        "densities": {"type": "array", "items": {"type": "number",
                      "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                      "minItems": 1},
        "sizes": {"type": "array", "items": _positive_int(2), "minItems": 1},
        "beta_rule": {"type": "string", "enum": ["L", "L2_OVER_16"]},
        "deltas": {"type": "array", "items": {"type": "number", "minimum": 0},
                   "minItems": 2},
        "realizations": _positive_int(2),
        "seed": _SEED,
        "sweeps": _SWEEPS,
        "mu_tolerance": {"type": "number", "exclusiveMinimum": 0},
        "t": {"type": "number"},
        "label": {"type": "string"},
    },
}

ANALYZE_SCHEMA = {
    "type": "object",
    "required": ["curves", "mode"],
    "additionalProperties": False,
    "properties": {
        "curves": {"type": "string"},  # path to a scan's curves.json
        "mode": {"type": "string", "enum": ["linear", "constant"]},
        "drop_smallest": {"type": "boolean"},
        "bootstrap": _positive_int(8),
        "bootstrap_seed": _SEED,
        "nu": {"type": "number", "exclusiveMinimum": 0},
        "label": {"type": "string"},
    },
}

SCHEMAS = {
    "evolve": EVOLVE_SCHEMA,
    "relative": RELATIVE_SCHEMA,
    "decode-experiment": DECODE_SCHEMA,
    "qmc": QMC_SCHEMA,
    "scan": SCAN_SCHEMA,
    "analyze": ANALYZE_SCHEMA,
}


def validate_config(subcommand: str, config: dict) -> dict:
    """Validate against the subcommand schema; raise ConfigError with
    field-path diagnostics."""
    schema = SCHEMAS[subcommand]
    validator = jsonschema.Draft202012Validator(schema)
    problems = [
        f"{err.json_path}: {err.message}"
        for err in sorted(validator.iter_errors(config), key=str)
    ]
    if subcommand == "qmc" and not problems:
        if ("mu" in config) == ("density" in config):
            problems.append("$: exactly one of 'mu' or 'density' is required")
    if problems:
        raise ConfigError(problems)
    return config


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def dumps_canonical(doc) -> str:
    """Deterministic JSON text (sorted keys, shortest float repr)."""
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write_text(path, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc):
    atomic_write_text(path, dumps_canonical(doc))


def write_csv(path, header: list[str], rows, manifest_name: str | None = None):
    """Deterministic CSV: '# manifest: ...' comment, repr floats."""
    lines = []
    if manifest_name:
        lines.append(f"# manifest: {manifest_name}")
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for x in row:
            if isinstance(x, float):
                cells.append(repr(x))
            else:
                cells.append(str(x))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV written by write_csv, skipping comment lines."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]
