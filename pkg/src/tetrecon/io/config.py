"""Run configuration: JSON with sections scanner / train / energy / clean / eval."""

import copy
import json
from pathlib import Path

import jsonschema

from ..scanner.scan import PRESETS, ScanConfig

DEFAULTS = {
    "scanner": {"preset": "HR", "seed": 0},
    "train": {"epochs": 30, "batch_size": 128, "lr": 1e-4, "lr_decay_every": 10,
              "lr_decay": 0.1, "depth": 4, "steps_per_epoch": 0, "seed": 0,
              "occupancy_samples": 100},
    "energy": {"lambda": 1.0, "alpha_vis": 100.0, "pin_infinite": True,
               "baseline_lambda": 5.0, "baseline_alpha_vis": 32.0, "baseline_sigma": None,
               "max_cells_in_flight": 20000},
    "clean": {"enabled": False, "edge_factor": 5.0, "min_component_faces": 10},
    "eval": {"samples": 100000, "taus": [0.5, 1.0, 2.0, 5.0], "seed": 0},
}

_pos_int = {"type": "integer", "minimum": 1}
_nonneg = {"type": "number", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _section(props):
    return {"type": "object", "additionalProperties": False, "properties": props}


SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scanner": _section({
            "preset": {"enum": sorted(PRESETS)},
            "resolution_x": _pos_int, "resolution_y": _pos_int, "scanner_positions": _pos_int,
            "min_range": _pos, "max_range": _pos, "noise_sigma": _nonneg,
            "outlier_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            "seed": {"type": "integer", "minimum": 0},
        }),
        "train": _section({
            "epochs": {"type": "integer", "minimum": 0}, "batch_size": _pos_int, "lr": _nonneg,
            "lr_decay_every": _pos_int, "lr_decay": _pos, "depth": _pos_int,
            "steps_per_epoch": {"type": "integer", "minimum": 0},
            "seed": {"type": "integer", "minimum": 0}, "occupancy_samples": _pos_int,
        }),
        "energy": _section({
            "lambda": _nonneg, "alpha_vis": _nonneg, "pin_infinite": {"type": "boolean"},
            "baseline_lambda": _nonneg, "baseline_alpha_vis": _nonneg,
            "baseline_sigma": {"oneOf": [{"type": "null"}, _nonneg]},
            "max_cells_in_flight": _pos_int,
        }),
        "clean": _section({
            "enabled": {"type": "boolean"}, "edge_factor": _pos,
            "min_component_faces": {"type": "integer", "minimum": 0},
        }),
        "eval": _section({
            "samples": _pos_int, "seed": {"type": "integer", "minimum": 0},
            "taus": {"type": "array", "items": _pos, "minItems": 1},
        }),
    },
}


class SchemaError(ValueError):
    """Invalid configuration; ``pointer`` is the JSON pointer of the offending value."""

    def __init__(self, msg, pointer=""):
        super().__init__(f"{pointer or '/'}: {msg}")
        self.pointer = pointer


def _pointer(path):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate_config(doc):
    """Defaults merged with ``doc`` after schema validation."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        raise SchemaError(e.message, _pointer(e.absolute_path))
    cfg = copy.deepcopy(DEFAULTS)
    for sec, vals in doc.items():
        cfg[sec].update(vals)
    try:
        scan_config(cfg)
    except ValueError as e:
        raise SchemaError(str(e), "/scanner") from None
    return cfg


def read_config(path=None):
    if path is None:
        return validate_config({})
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON at line {e.lineno}: {e.msg}") from None
    return validate_config(doc)


def scan_config(cfg, seed=None, preset=None):
    """ScanConfig from a validated configuration: the preset, then explicit overrides."""
    sc = dict(cfg["scanner"])
    name = sc.pop("preset", "HR")
    base = dict(min_range=70.0, max_range=300.0)
    base.update(PRESETS[preset or name])
    base.update(sc)
    if seed is not None:
        base["seed"] = int(seed)
    return ScanConfig(**base)
