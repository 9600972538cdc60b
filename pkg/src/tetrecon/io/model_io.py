"""Model files: one JSON document holding weights, batch-norm statistics and the normalizer."""

import json
from pathlib import Path

from ..net.model import OccupancyModel
from .ply import ParseError


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", line=e.lineno) from None
    return OccupancyModel.from_dict(doc)
