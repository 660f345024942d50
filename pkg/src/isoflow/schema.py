"""JSON schemas for run configs and emitted reports (version ``isoflow/1``).

Non-finite reals are written as the strings ``"inf"``, ``"-inf"`` and
``"nan"`` so every report is strict JSON.
"""

import math

SCHEMA_VERSION = "isoflow/1"

SIMULATE_HEADER = ("t", "eta", "p_hat", "ci_lo", "ci_hi", "paths", "seed")
SWEEP_HEADER = ("parameter", "value", "lambda1", "gamma1", "verdict", "speed_mass")

VERDICTS = ["Synchronizes", "Ergodic", "NotApplicable", "Critical"]

_pos = {"type": "number", "exclusiveMinimum": 0}
_real = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}
_coefs = {"type": "array", "items": {"type": "number", "minimum": 0}, "maxItems": 64}

SPHERE = {
    "type": "object",
    "properties": {
        "d": {"type": "integer", "minimum": 3},
        "a": _coefs,
        "b": _coefs,
        "label": {"type": "string"},
    },
    "required": ["d"],
    "additionalProperties": False,
}

IOUF = {
    "type": "object",
    "properties": {
        "d": {"type": "integer", "minimum": 2},
        "c": {"type": "number", "minimum": 0},
        "covariance": {"enum": ["gaussian"]},
    },
    "required": ["d", "c"],
    "additionalProperties": False,
}

DIFFUSION = {
    "type": "object",
    "properties": {
        "drift": {"type": "string", "minLength": 1},
        "diffusion": {"type": "string", "minLength": 1},
        "R": {"oneOf": [_pos, {"enum": ["inf"]}]},
        "reference": _pos,
        "label": {"type": "string"},
    },
    "required": ["drift", "diffusion"],
    "additionalProperties": False,
}

SIM = {
    "type": "object",
    "properties": {
        "dt": _pos,
        "horizon": _pos,
        "paths": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "r0": _pos,
        "eta": {"type": "array", "items": _pos, "minItems": 1},
        "times": {"type": "array", "items": _pos, "minItems": 1},
        "floor": _pos,
        "r_switch": _pos,
        "ceil_eps": _pos,
        "threads": {"type": "integer", "minimum": 1},
        "max_substeps": {"type": "integer", "minimum": 1},
    },
    "required": ["dt", "horizon", "paths", "seed", "r0", "eta"],
    "additionalProperties": False,
}

SWEEP = {
    "type": "object",
    "properties": {
        "parameter": {"type": "string", "pattern": "^(c|d|[ab][1-9][0-9]*)$"},
        "values": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["parameter", "values"],
    "additionalProperties": False,
}

CONFIG = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "isoflow run config",
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "command": {"enum": ["classify", "simulate", "spectrum", "sweep"]},
        "sphere": SPHERE,
        "iouf": IOUF,
        "diffusion": DIFFUSION,
        "sim": SIM,
        "sweep": SWEEP,
    },
    "oneOf": [
        {"required": ["sphere"], "not": {"anyOf": [{"required": ["iouf"]}, {"required": ["diffusion"]}]}},
        {"required": ["iouf"], "not": {"anyOf": [{"required": ["sphere"]}, {"required": ["diffusion"]}]}},
        {"required": ["diffusion"], "not": {"anyOf": [{"required": ["sphere"]}, {"required": ["iouf"]}]}},
    ],
    "additionalProperties": False,
}

_model_echo = {
    "type": "object",
    "properties": {"kind": {"enum": ["sphere", "iouf", "diffusion"]}},
    "required": ["kind"],
}

_boundary = {
    "type": "object",
    "properties": {
        "boundary": {"enum": ["zero", "R"]},
        "scale_limit": _real,
        "accessible": {"type": "boolean"},
        "speed_mass_near": _real,
        "scale_exponent": _real,
        "feller_integral": _real,
    },
    "required": ["boundary", "scale_limit", "accessible", "speed_mass_near"],
    "additionalProperties": False,
}

_common = {
    "schema": {"const": SCHEMA_VERSION},
    "model": _model_echo,
    "description": {"type": "string"},
    "wall_time_s": {"type": "number", "minimum": 0},
}

CLASSIFY_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        **_common,
        "command": {"const": "classify"},
        "verdict": {"enum": VERDICTS},
        "predicted": {"enum": VERDICTS},
        "assumptions_ok": {"type": "boolean"},
        "speed_mass": _real,
        "lambda1": {"oneOf": [_real, {"type": "null"}]},
        "lambda1_c0": _real,
        "spectrum": {"type": "array", "items": _real},
        "gamma1": _real,
        "boundary_coefficients": {
            "type": "object",
            "properties": {"alpha1": _real, "alpha1_prime": _real, "beta1": _real},
            "required": ["alpha1", "alpha1_prime", "beta1"],
        },
        "boundaries": {"type": "array", "items": _boundary},
        "evidence": {"type": "object"},
    },
    "required": ["schema", "command", "model", "description", "verdict", "assumptions_ok",
                 "speed_mass", "lambda1", "boundaries", "evidence", "wall_time_s"],
    "additionalProperties": False,
}

SPECTRUM_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        **_common,
        "command": {"const": "spectrum"},
        "lambda1": _real,
        "spectrum": {"type": "array", "items": _real, "minItems": 1},
        "boundary_coefficients": {"type": "object"},
        "gamma1": _real,
        "lambda1_c0": _real,
        "c": {"type": "number"},
        "shift_identity": {"type": "boolean"},
    },
    "required": ["schema", "command", "model", "description", "lambda1", "spectrum", "wall_time_s"],
    "additionalProperties": False,
}

SIMULATE_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        **_common,
        "command": {"const": "simulate"},
        "verdict": {"enum": VERDICTS},
        "sim": {"type": "object"},
        "csv": {"type": "string"},
        "rows": {"type": "integer", "minimum": 1},
        "paths_used": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "frozen_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "clamp_fraction": {"type": "number", "minimum": 0},
        "trend": {"enum": ["non-decreasing", "decreasing", None]},
        "concordant": {"type": ["boolean", "null"]},
    },
    "required": ["schema", "command", "model", "description", "verdict", "sim", "csv", "rows",
                 "paths_used", "seed", "trend", "concordant", "wall_time_s"],
    "additionalProperties": False,
}


def jsonable(value):
    """Recursively convert numpy scalars and non-finite floats for strict JSON."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, str)) or value is None:
        return value
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return str(value)
