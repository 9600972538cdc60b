"""Reconstruction metrics: Chamfer distance, volumetric IoU, precision/recall/F1."""

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .parallel import get_threads
from .scanner.inside import PointInMesh

DEFAULT_SAMPLES = 100_000
DEFAULT_TAUS = (0.5, 1.0, 2.0, 5.0)


class EmptyMesh(ValueError):
    """The mesh has no faces of positive area."""


class NotWatertight(ValueError):
    """Inside/outside is undefined because some edge has an odd number of faces."""


def sample_surface(mesh, n, seed=0):
    """``n`` points uniform on the surface (faces drawn by area, then uniform barycentrics)."""
    if mesh.n_faces == 0:
        raise EmptyMesh("cannot sample an empty mesh")
    area = mesh.areas()
    total = area.sum()
    if not total > 0:
        raise EmptyMesh("mesh has zero area")
    rng = np.random.default_rng(seed)
    f = rng.choice(mesh.n_faces, size=int(n), p=area / total)
    u = rng.random(int(n))
    v = rng.random(int(n))
    fold = u + v > 1.0
    u[fold] = 1.0 - u[fold]
    v[fold] = 1.0 - v[fold]
    T = mesh.triangles()[f]
    return T[:, 0] + u[:, None] * (T[:, 1] - T[:, 0]) + v[:, None] * (T[:, 2] - T[:, 0])


def _nn_dist(src, dst):
    return cKDTree(dst).query(src, k=1, workers=get_threads())[0]


def chamfer_points(X, Y):
    """mean_x min_y |x - y|^2 + mean_y min_x |y - x|^2."""
    X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
    Y = np.asarray(Y, dtype=np.float64).reshape(-1, 3)
    if len(X) == 0 or len(Y) == 0:
        raise EmptyMesh("empty point set")
    return float(np.mean(_nn_dist(X, Y) ** 2) + np.mean(_nn_dist(Y, X) ** 2))


def chamfer(mesh_gt, mesh_pred, n=DEFAULT_SAMPLES, seed=0, normalized=False):
    """Two-sided Chamfer distance between surface samplings, in squared units.

    With ``normalized`` the value is divided by the squared bounding-box
    diagonal of ``mesh_gt`` and multiplied by 100.
    """
    d = chamfer_points(sample_surface(mesh_gt, n, seed), sample_surface(mesh_pred, n, seed))
    if normalized:
        lo, hi = mesh_gt.bbox()
        d = 100.0 * d / float(np.sum((hi - lo) ** 2))
    return d


def check_closed(mesh, name="mesh"):
    if mesh.n_faces == 0:
        raise NotWatertight(f"{name} is empty")
    _, counts = mesh.edges()
    odd = int(np.count_nonzero(counts % 2))
    if odd:
        raise NotWatertight(f"{name} has {odd} edges with an odd number of faces")


def volumetric_iou(mesh_gt, mesh_pred, n=DEFAULT_SAMPLES, seed=0):
    """Monte-Carlo IoU from samples uniform in the union of the bounding boxes.

    Samples inside neither shape are ignored; if all are, the IoU is 0.
    """
    check_closed(mesh_gt, "ground-truth mesh")
    check_closed(mesh_pred, "predicted mesh")
    lo = np.minimum(mesh_gt.bbox()[0], mesh_pred.bbox()[0])
    hi = np.maximum(mesh_gt.bbox()[1], mesh_pred.bbox()[1])
    rng = np.random.default_rng(seed)
    q = lo + rng.random((int(n), 3)) * (hi - lo)
    a = PointInMesh(mesh_gt).contains(q)
    b = PointInMesh(mesh_pred).contains(q)
    union = np.count_nonzero(a | b)
    return float(np.count_nonzero(a & b) / union) if union else 0.0


def f1_score(p, r):
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def precision_recall_f1(points_gt, points_pred, taus=DEFAULT_TAUS):
    """Per tau: accuracy (pred near gt), completeness (gt near pred) and their harmonic mean."""
    gt = np.asarray(points_gt, dtype=np.float64).reshape(-1, 3)
    pred = np.asarray(points_pred, dtype=np.float64).reshape(-1, 3)
    if len(gt) == 0 or len(pred) == 0:
        raise EmptyMesh("empty point set")
    d_pred = _nn_dist(pred, gt)
    d_gt = _nn_dist(gt, pred)
    out = []
    for tau in taus:
        if not tau > 0:
            raise ValueError("tau must be positive")
        p = float(np.mean(d_pred <= tau))
        r = float(np.mean(d_gt <= tau))
        out.append({"tau": float(tau), "accuracy": p, "completeness": r, "f1": f1_score(p, r)})
    return out


@dataclass
class MetricReport:
    chamfer: float
    chamfer_normalized: float
    iou: float                    # None when a mesh is not closed
    fscores: list = field(default_factory=list)
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    note: str = ""

    def to_dict(self):
        return asdict(self)


def evaluate(mesh_gt, mesh_pred, taus=DEFAULT_TAUS, n=DEFAULT_SAMPLES, seed=0):
    """All metrics from one pair of surface samplings (both drawn with ``seed``)."""
    X = sample_surface(mesh_gt, n, seed)
    Y = sample_surface(mesh_pred, n, seed)
    cd = chamfer_points(X, Y)
    lo, hi = mesh_gt.bbox()
    note = ""
    try:
        iou = volumetric_iou(mesh_gt, mesh_pred, n, seed)
    except NotWatertight as e:
        iou, note = None, str(e)
    return MetricReport(cd, 100.0 * cd / float(np.sum((hi - lo) ** 2)), iou,
                        precision_recall_f1(X, Y, taus), int(n), int(seed), note)
