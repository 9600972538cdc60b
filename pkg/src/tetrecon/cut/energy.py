"""Binary inside/outside labeling energy over the cells of a tetrahedralization.

E(l) = sum_t U_t(l_t) + sum_{facets (s,t)} lambda beta_st [l_s != l_t]

with U_t(Outside) = i_t and U_t(Inside) = o_t, so a cell with a high inside
score pays for being labeled outside and vice versa.
"""

from dataclasses import dataclass

import numpy as np

from ..geom.delaunay import FACET_VERTS, locate_many
from ..geom.morphology import circumcenters
from .maxflow import NonSubmodular, potts_cut

OUTSIDE = 0
INSIDE = 1


@dataclass
class EnergyInstance:
    unary: np.ndarray            # (n, 2): cost of Outside, cost of Inside
    edges: np.ndarray            # (e, 2) cell pairs sharing a facet
    weights: np.ndarray          # (e,) lambda * beta
    lam: float = 1.0
    alpha_vis: float = 0.0
    camera_cells: np.ndarray = None
    pinned_outside: np.ndarray = None   # bool mask forced to Outside, or None

    @property
    def n_cells(self):
        return len(self.unary)

    def energy(self, labels):
        return energy_of(self, labels)


@dataclass
class LabelAssignment:
    labels: np.ndarray           # int8, 0 = Outside, 1 = Inside
    energy: float

    @property
    def inside(self):
        return self.labels == INSIDE


def energy_of(inst, labels):
    labels = np.asarray(labels).astype(np.int64)
    u = inst.unary[np.arange(len(labels)), labels].sum()
    cut = labels[inst.edges[:, 0]] != labels[inst.edges[:, 1]]
    return float(u + inst.weights[cut].sum())


def beta_weights(tri, facets=None):
    """1 - min(cos phi, cos psi) per facet, 1 on facets touching an infinite cell.

    cos phi = d / R where R is the circumradius of a cell and d the signed
    distance from its circumcenter to the facet plane, positive toward the
    cell's own opposite vertex.  ``facets`` are rows of ``tri.facets()``.
    """
    if facets is None:
        facets = tri.facets()
    c, slot, n = facets[:, 0], facets[:, 1], facets[:, 2]
    beta = np.ones(len(facets))
    fin = ~(tri.infinite[c] | tri.infinite[n])
    if not fin.any():
        return beta
    c, slot, n = c[fin], slot[fin], n[fin]
    P = tri.points
    fv = tri.cells[c[:, None], FACET_VERTS[slot]]
    a, b, d = P[fv[:, 0]], P[fv[:, 1]], P[fv[:, 2]]
    nrm = np.cross(b - a, d - a)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)   # points away from c
    cc_c, R_c = circumcenters(P[tri.cells[c]])
    cc_n, R_n = circumcenters(P[tri.cells[n]])
    with np.errstate(invalid="ignore"):
        cos_c = -np.einsum("ij,ij->i", cc_c - a, nrm) / R_c
        cos_n = np.einsum("ij,ij->i", cc_n - a, nrm) / R_n
    # a cell flat in floating point has no usable circumsphere: treat it as neutral
    cos_c = np.clip(np.nan_to_num(cos_c, nan=0.0), -1.0, 1.0)
    cos_n = np.clip(np.nan_to_num(cos_n, nan=0.0), -1.0, 1.0)
    beta[fin] = 1.0 - np.minimum(cos_c, cos_n)
    return beta


def beta_weight(tri, s, t):
    """beta for the facet shared by cells ``s`` and ``t``."""
    # evaluate from the lower id, as tri.facets() does, so the value is symmetric bit for bit
    s, t = min(s, t), max(s, t)
    slot = np.nonzero(tri.neighbors[s] == t)[0]
    if len(slot) == 0:
        raise ValueError(f"cells {s} and {t} are not adjacent")
    back = int(np.nonzero(tri.neighbors[t] == s)[0][0])
    return float(beta_weights(tri, np.array([[s, slot[0], t, back]]))[0])


def camera_cells_of(tri, cameras):
    """Cells containing the distinct camera positions (infinite cells outside the hull)."""
    cams = np.unique(np.asarray(cameras, dtype=np.float64).reshape(-1, 3), axis=0)
    return np.unique(locate_many(tri, cams))


def build_energy(scores, tri, lam=1.0, alpha_vis=100.0, cameras=None, camera_cells=None,
                 pin_infinite=True):
    """Energy from (i_t, o_t) scores; alpha_vis is added to o_t of camera cells.

    Camera cells are located from ``cameras`` unless given.  With
    ``pin_infinite`` infinite cells are constrained to Outside so the
    extracted interface never needs a facet through the infinite vertex.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (tri.n_cells, 2):
        raise ValueError(f"scores must have shape ({tri.n_cells}, 2)")
    if lam < 0:
        raise NonSubmodular("lambda must be >= 0")
    unary = scores.copy()
    if camera_cells is None:
        camera_cells = (camera_cells_of(tri, cameras) if cameras is not None
                        else np.zeros(0, dtype=np.int64))
    camera_cells = np.asarray(camera_cells, dtype=np.int64)
    unary[camera_cells, 1] += alpha_vis
    facets = tri.facets()
    weights = lam * beta_weights(tri, facets) if lam > 0 else np.zeros(len(facets))
    return EnergyInstance(unary, facets[:, [0, 2]].copy(), weights, float(lam), float(alpha_vis),
                          camera_cells, tri.infinite.copy() if pin_infinite else None)


def min_cut_solve(inst):
    labels, _ = potts_cut(inst.unary, inst.edges, inst.weights, inst.pinned_outside)
    return LabelAssignment(labels, energy_of(inst, labels))


def direct_threshold(scores):
    """Inside iff the softmax occupancy exceeds 0.5, i.e. iff i_t > o_t.

    The comparison is made on the scores, which is the same test without the
    rounding of the exponentials.  The energy field is left at nan.
    """
    s = np.asarray(scores, dtype=np.float64)
    return LabelAssignment((s[:, 0] > s[:, 1]).astype(np.int8), float("nan"))


def boundary_facets(inst, labels):
    labels = np.asarray(labels)
    return np.nonzero(labels[inst.edges[:, 0]] != labels[inst.edges[:, 1]])[0]
