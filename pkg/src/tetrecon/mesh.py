"""Interface surface extraction, spike cleaning, and intrinsic topology statistics."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .geom.delaunay import FACET_VERTS, INF
from .trimesh import TriMesh


def interface_facets(tri, labels):
    """Oriented vertex triples of facets between differently labeled cells.

    The winding makes each normal point into the Outside cell.  Facets through
    the infinite vertex cannot be emitted and are counted in the second return
    value; they only occur when two adjacent infinite cells disagree.
    """
    labels = np.asarray(labels).astype(bool)
    F = tri.facets()
    c, slot, n, back = F.T
    diff = labels[c] != labels[n]
    c, slot, n, back = c[diff], slot[diff], n[diff], back[diff]
    # orient from a finite incident cell: FACET_VERTS normals point away from it
    use_c = ~tri.infinite[c]
    ref = np.where(use_c, c, n)
    ref_slot = np.where(use_c, slot, back)
    tris = tri.cells[ref[:, None], FACET_VERTS[ref_slot]]
    ok = ~np.any(tris == INF, axis=1)
    flip = ~labels[ref]           # reference cell is Outside: normal must point back into it
    tris = np.where(flip[:, None], tris[:, ::-1], tris)
    return tris[ok], int(np.count_nonzero(~ok))


def extract_surface(tri, labels):
    """Triangles between Inside and Outside cells, oriented toward Outside, with compacted vertices."""
    tris, _ = interface_facets(tri, labels)
    return compact(tri.points, tris)


def compact(vertices, faces):
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    used, inv = np.unique(faces, return_inverse=True)
    return TriMesh(np.asarray(vertices)[used], inv.reshape(-1, 3))


def face_components(mesh):
    """Connected components of faces that share an edge: (count, label per face)."""
    m = mesh.n_faces
    if m == 0:
        return 0, np.zeros(0, dtype=np.int64)
    e = np.sort(mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    _, eid = np.unique(e, axis=0, return_inverse=True)
    eid = eid.ravel()
    k = eid.max() + 1
    # bipartite face/edge graph; faces meeting on an edge end up in one component
    rows = np.repeat(np.arange(m), 3)
    A = sp.csr_matrix((np.ones(3 * m), (rows, m + eid)), shape=(m + k, m + k))
    ncomp, lab = connected_components(A, directed=False)
    lab = lab[:m]
    _, lab = np.unique(lab, return_inverse=True)
    return int(lab.max() + 1), lab


def _clean_once(mesh, edge_factor, min_component_faces):
    if mesh.n_faces == 0:
        return mesh
    T = mesh.triangles()
    lens = np.linalg.norm(T[:, [1, 2, 0]] - T, axis=2)
    uniq, _ = mesh.edges()
    med = np.median(np.linalg.norm(mesh.vertices[uniq[:, 0]] - mesh.vertices[uniq[:, 1]], axis=1))
    keep = lens.max(1) <= edge_factor * med
    out = compact(mesh.vertices, mesh.faces[keep])
    _, lab = face_components(out)
    if len(lab):
        sizes = np.bincount(lab)
        out = compact(out.vertices, out.faces[sizes[lab] >= min_component_faces])
    return out


def clean_mesh(mesh, edge_factor=5.0, min_component_faces=10):
    """Drop faces with an edge longer than edge_factor x the median edge, then small components.

    Both rules are reapplied until nothing changes, since removing faces moves
    the median; the result is therefore a fixpoint and cleaning is idempotent.
    """
    cur = compact(mesh.vertices, mesh.faces)
    while True:
        nxt = _clean_once(cur, edge_factor, min_component_faces)
        if nxt.n_faces == cur.n_faces:
            return nxt
        cur = nxt


def topology_stats(mesh):
    """Components, non-manifold and boundary edge counts, and watertightness.

    A mesh is watertight when it has faces and every edge has exactly two.
    """
    _, counts = mesh.edges() if mesh.n_faces else (None, np.zeros(0, dtype=np.int64))
    ncomp, _ = face_components(mesh)
    nm = int(np.count_nonzero(counts > 2))
    bd = int(np.count_nonzero(counts == 1))
    return {
        "components": ncomp,
        "non_manifold_edges": nm,
        "boundary_edges": bd,
        "watertight": bool(mesh.n_faces > 0 and np.all(counts == 2)),
    }


def even_edge_closure(mesh):
    """True when every edge has an even number of incident faces."""
    if mesh.n_faces == 0:
        return True
    _, counts = mesh.edges()
    return bool(np.all(counts % 2 == 0))
