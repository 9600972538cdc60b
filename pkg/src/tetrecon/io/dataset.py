"""Dataset directories: scan bundles with per-cell occupancy, ground-truth meshes, a manifest."""

import json
from pathlib import Path

import numpy as np

from .bundle import dumps, read_scan_bundle, write_scan_bundle
from .ply import ParseError, read_mesh, write_mesh

MANIFEST = "manifest.json"


def write_scene(root, name, bundle, gt_mesh, occupancy, delaunay_seed=0):
    """Store one scene; the occupancy goes into the bundle sidecar under ``cells``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    bundle.extras["cells"] = {"n_cells": int(len(occupancy)), "delaunay_seed": int(delaunay_seed),
                              "occupancy": np.asarray(occupancy, dtype=np.float64).tolist()}
    write_scan_bundle(bundle, root / f"{name}.ply")
    write_mesh(root / f"{name}.gt.ply", gt_mesh)
    return {"name": name, "scan": f"{name}.ply", "mesh": f"{name}.gt.ply"}


def write_manifest(root, entries, meta=None):
    doc = {"format": "tetrecon-dataset", "version": 1, "scenes": entries, "meta": meta or {}}
    (Path(root) / MANIFEST).write_text(dumps(doc))


def read_manifest(root):
    path = Path(root) / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {root}")
    doc = json.loads(path.read_text())
    if doc.get("format") != "tetrecon-dataset":
        raise ParseError(f"{path}: not a dataset manifest")
    return doc


def load_scene(root, entry):
    """(bundle, ground-truth mesh, occupancy array or None, delaunay seed)."""
    root = Path(root)
    bundle = read_scan_bundle(root / entry["scan"])
    mesh = read_mesh(root / entry["mesh"])
    cells = bundle.extras.get("cells")
    occ = None if cells is None else np.asarray(cells["occupancy"], dtype=np.float64)
    seed = 0 if cells is None else int(cells.get("delaunay_seed", 0))
    return bundle, mesh, occ, seed
