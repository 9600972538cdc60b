"""Per-cell volume, edge lengths, and circumsphere."""

from dataclasses import dataclass

import numpy as np

from .delaunay import INF


class InfiniteCell(ValueError):
    """Morphology requested for a cell with a vertex at infinity."""


@dataclass(frozen=True)
class CellMorphology:
    volume: float
    min_edge: float
    max_edge: float
    circumradius: float
    circumcenter: np.ndarray


_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def circumcenters(P):
    """Circumcenters and radii of tetrahedra given as an (m, 4, 3) array."""
    a = P[:, 0]
    u = P[:, 1] - a
    v = P[:, 2] - a
    w = P[:, 3] - a
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    ww = np.einsum("ij,ij->i", w, w)
    vxw = np.cross(v, w)
    wxu = np.cross(w, u)
    uxv = np.cross(u, v)
    det = np.einsum("ij,ij->i", u, vxw)
    with np.errstate(divide="ignore", invalid="ignore"):
        # cells that are flat in floating point get an infinite (or nan) center
        off = (uu[:, None] * vxw + vv[:, None] * wxu + ww[:, None] * uxv) / (2.0 * det[:, None])
    return a + off, np.linalg.norm(off, axis=1)


def morphology_arrays(points, cells):
    """Vectorized morphology of finite cells: (volume, min_edge, max_edge, circumradius, circumcenter)."""
    P = points[cells]
    u = P[:, 1] - P[:, 0]
    v = P[:, 2] - P[:, 0]
    w = P[:, 3] - P[:, 0]
    vol = np.abs(np.einsum("ij,ij->i", u, np.cross(v, w))) / 6.0
    e = np.linalg.norm(P[:, _EDGES[:, 1]] - P[:, _EDGES[:, 0]], axis=2)
    cc, r = circumcenters(P)
    return vol, e.min(1), e.max(1), r, cc


def cell_morphology(tri, c):
    cell = tri.cells[c]
    if np.any(cell == INF):
        raise InfiniteCell(f"cell {c} is infinite")
    vol, lo, hi, r, cc = morphology_arrays(tri.points, cell[None, :])
    return CellMorphology(float(vol[0]), float(lo[0]), float(hi[0]), float(r[0]), cc[0])
