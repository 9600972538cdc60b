"""Scan bundles: a PLY point file with per-point camera ids plus a JSON sidecar."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ply import ParseError, read_ply, write_ply

BUNDLE_VERSION = 1


class MissingSidecar(FileNotFoundError):
    pass


class IndexOutOfRange(ValueError):
    pass


@dataclass
class ScanBundle:
    points: np.ndarray              # (n, 3)
    camera_index: np.ndarray        # (n,)
    cameras: np.ndarray             # (c, 3)
    provenance: dict = None         # shape id, scan config, seed
    extras: dict = field(default_factory=dict)   # e.g. per-cell occupancy

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.camera_index = np.asarray(self.camera_index, dtype=np.int64).ravel()
        self.cameras = np.asarray(self.cameras, dtype=np.float64).reshape(-1, 3)

    def sighting_cameras(self):
        return self.cameras[self.camera_index]


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def dumps(obj):
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_scan_bundle(bundle, path, format="binary_little_endian"):
    path = Path(path)
    if len(bundle.points) == 0:
        raise ValueError("a scan bundle needs at least one point")
    if len(bundle.camera_index) != len(bundle.points):
        raise ValueError("camera_index length differs from the point count")
    _check_range(bundle.camera_index, len(bundle.cameras))
    write_ply(path, bundle.points, camera_id=bundle.camera_index, format=format)
    side = {
        "format": "tetrecon-scan",
        "version": BUNDLE_VERSION,
        "n_points": int(len(bundle.points)),
        "cameras": bundle.cameras.tolist(),
        "provenance": bundle.provenance,
    }
    side.update(bundle.extras)
    sidecar_path(path).write_text(dumps(side))


def _check_range(idx, n_cameras):
    if len(idx) and (idx.min() < 0 or idx.max() >= n_cameras):
        bad = int(idx[(idx < 0) | (idx >= n_cameras)][0])
        pos = int(np.nonzero(idx == bad)[0][0])
        raise IndexOutOfRange(f"camera_id {bad} at point {pos} with {n_cameras} cameras")


def read_scan_bundle(path):
    path = Path(path)
    side_path = sidecar_path(path)
    if not side_path.exists():
        raise MissingSidecar(f"no sidecar {side_path} next to {path}")
    try:
        side = json.loads(side_path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{side_path}: {e.msg}", line=e.lineno) from None
    if side.get("format") != "tetrecon-scan":
        raise ParseError(f"{side_path}: not a scan sidecar")
    if side.get("version") != BUNDLE_VERSION:
        raise ParseError(f"{side_path}: unsupported version {side.get('version')!r}")
    data = read_ply(path)
    if data.camera_id is None:
        raise ParseError(f"{path}: vertices lack a camera_id property")
    if len(data.vertices) == 0:
        raise ParseError(f"{path}: no points")
    if side.get("n_points", len(data.vertices)) != len(data.vertices):
        raise ParseError(f"{side_path}: n_points does not match {path}")
    cams = np.asarray(side.get("cameras", []), dtype=np.float64).reshape(-1, 3)
    _check_range(data.camera_id, len(cams))
    known = {"format", "version", "n_points", "cameras", "provenance"}
    extras = {k: v for k, v in side.items() if k not in known}
    return ScanBundle(data.vertices, data.camera_id, cams, side.get("provenance"), extras)


def bundle_from_scan(scan, shape=None, config=None):
    """Bundle for a scanner result; provenance records the shape and the scan configuration."""
    prov = {"shape": shape, "n_outliers": int(scan.n_outliers),
            "scan_config": None if config is None else config.to_dict(),
            "seed": None if config is None else int(config.seed)}
    return ScanBundle(scan.points, scan.camera_index, scan.cameras, prov)
