"""Per-cell 12-dimensional feature vectors and their normalizer."""

from dataclasses import dataclass

import numpy as np

from .geom.morphology import morphology_arrays

N_FEATURES = 12
FEATURE_NAMES = (
    "count_Lv", "count_Lf", "count_Rv", "count_Rf",
    "minlen_Lv", "minlen_Lf", "minlen_Rv", "minlen_Rf",
    "volume", "min_edge", "max_edge", "circumradius",
)
STD_FLOOR = 1e-8
CLAMP = 10.0
# stand-in circumradius for cells that are flat in floating point
RADIUS_CAP = np.finfo(np.float64).max


def compute_features(tri, stats):
    """Feature matrix (n_cells, 12); rows of infinite cells are zero."""
    F = np.zeros((tri.n_cells, N_FEATURES))
    fin = tri.finite_cells()
    F[:, 0:4] = stats.counts
    F[:, 4:8] = stats.min_lens
    vol, lo, hi, r, _ = morphology_arrays(tri.points, tri.cells[fin])
    F[fin, 8] = vol
    F[fin, 9] = lo
    F[fin, 10] = hi
    F[fin, 11] = np.where(np.isfinite(r), r, RADIUS_CAP)
    F[tri.infinite] = 0.0
    return F


@dataclass
class FeatureNormalizer:
    """Per-dimension standardization, optionally of log1p(features).

    All twelve features are non-negative and heavy tailed (sliver cells have
    circumradii many orders of magnitude above the median), so by default the
    statistics are taken on log1p of the raw values.
    """
    mean: np.ndarray
    std: np.ndarray
    log: bool = True

    def transform(self, features):
        X = np.asarray(features, dtype=np.float64)
        return np.log1p(X) if self.log else X

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "log": self.log}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64),
                   bool(d.get("log", False)))


def fit_normalizer(features, finite_mask, log=True):
    X = np.asarray(features, dtype=np.float64)[np.asarray(finite_mask, dtype=bool)]
    if len(X) < 2:
        raise ValueError("need at least two finite rows to fit a normalizer")
    if log:
        X = np.log1p(X)
    return FeatureNormalizer(X.mean(0), np.maximum(X.std(0), STD_FLOOR), log)


def apply_normalizer(norm, features, finite_mask=None, clamp=CLAMP):
    """Standardize, clamp to [-clamp, clamp], then zero the rows outside ``finite_mask``."""
    Z = (norm.transform(features) - norm.mean) / norm.std
    if clamp is not None:
        np.clip(Z, -clamp, clamp, out=Z)
    if finite_mask is not None:
        Z[~np.asarray(finite_mask, dtype=bool)] = 0.0
    return Z
