"""Point-in-mesh queries and per-cell ground-truth occupancy."""

import numpy as np
from numba import njit

from .._hash import uniform
from ..parallel import chunk_bounds, run_chunks

# Ray directions tried in turn; irrational-looking components avoid axis-aligned faces.
_DIRECTIONS = np.array([[0.2718281828, 0.3141592653, 0.9096264743],
                        [-0.5772156649, 0.6180339887, 0.5330583711],
                        [0.7071067812, -0.4142135624, -0.5734623443],
                        [-0.1234567891, -0.9876543210, 0.0967821456]])


def _frame(d):
    d = d / np.linalg.norm(d)
    a = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(d, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return np.stack([e1, e2, d])


class PointInMesh:
    """Parity test along a ray, with a 2D grid over the projected triangles.

    A ray that grazes an edge or vertex, or a query on the surface itself, is
    retried along the next direction.
    """

    def __init__(self, mesh, grid=None):
        self.mesh = mesh
        tris = mesh.triangles()
        m = len(tris)
        g = grid or max(4, int(np.sqrt(m / 2)))
        scale = float(np.linalg.norm(np.ptp(mesh.vertices, axis=0)))
        self.tol2 = 1e-12 * scale * scale
        self.tolz = 1e-12 * scale
        self.frames = []
        for d in _DIRECTIONS:
            R = _frame(d)
            P = tris @ R.T
            lo = P[:, :, :2].min(axis=(0, 1))
            hi = P[:, :, :2].max(axis=(0, 1))
            span = np.maximum(hi - lo, 1e-300)
            start, items = _bin2d(P, lo, span, g)
            self.frames.append((R, np.ascontiguousarray(P), lo, span, start, items))
        self.g = g

    def contains(self, q):
        q = np.ascontiguousarray(q, dtype=np.float64).reshape(-1, 3)
        out = _query_many(q, self._packed(), self.g, self.tol2, self.tolz)
        return out

    def _packed(self):
        Rs = np.stack([f[0] for f in self.frames])
        Ps = np.stack([f[1] for f in self.frames])
        los = np.stack([f[2] for f in self.frames])
        spans = np.stack([f[3] for f in self.frames])
        starts = np.stack([f[4] for f in self.frames])
        lens = [len(f[5]) for f in self.frames]
        items = np.full((len(self.frames), max(lens)), -1, dtype=np.int64)
        for k, f in enumerate(self.frames):
            items[k, :lens[k]] = f[5]
        return Rs, Ps, los, spans, starts, items


@njit(cache=True)
def _bin2d(P, lo, span, g):
    m = P.shape[0]
    counts = np.zeros(g * g + 1, dtype=np.int64)
    ix0 = np.empty(m, dtype=np.int64)
    ix1 = np.empty(m, dtype=np.int64)
    iy0 = np.empty(m, dtype=np.int64)
    iy1 = np.empty(m, dtype=np.int64)
    for t in range(m):
        x0 = min(P[t, 0, 0], min(P[t, 1, 0], P[t, 2, 0]))
        x1 = max(P[t, 0, 0], max(P[t, 1, 0], P[t, 2, 0]))
        y0 = min(P[t, 0, 1], min(P[t, 1, 1], P[t, 2, 1]))
        y1 = max(P[t, 0, 1], max(P[t, 1, 1], P[t, 2, 1]))
        ix0[t] = max(0, min(g - 1, int((x0 - lo[0]) / span[0] * g) - 1))
        ix1[t] = max(0, min(g - 1, int((x1 - lo[0]) / span[0] * g) + 1))
        iy0[t] = max(0, min(g - 1, int((y0 - lo[1]) / span[1] * g) - 1))
        iy1[t] = max(0, min(g - 1, int((y1 - lo[1]) / span[1] * g) + 1))
        for i in range(ix0[t], ix1[t] + 1):
            for j in range(iy0[t], iy1[t] + 1):
                counts[i * g + j + 1] += 1
    for k in range(g * g):
        counts[k + 1] += counts[k]
    fill = counts[:-1].copy()
    items = np.empty(counts[-1], dtype=np.int64)
    for t in range(m):
        for i in range(ix0[t], ix1[t] + 1):
            for j in range(iy0[t], iy1[t] + 1):
                items[fill[i * g + j]] = t
                fill[i * g + j] += 1
    return counts, items


@njit(cache=True, nogil=True)
def _parity(qx, qy, qz, R, P, lo, span, start, items, g, tol2, tolz):
    """1 inside, 0 outside, -1 degenerate for this direction."""
    x = R[0, 0] * qx + R[0, 1] * qy + R[0, 2] * qz
    y = R[1, 0] * qx + R[1, 1] * qy + R[1, 2] * qz
    z = R[2, 0] * qx + R[2, 1] * qy + R[2, 2] * qz
    fx = (x - lo[0]) / span[0]
    fy = (y - lo[1]) / span[1]
    if fx < 0.0 or fx > 1.0 or fy < 0.0 or fy > 1.0:
        return 0
    i = min(g - 1, int(fx * g))
    j = min(g - 1, int(fy * g))
    cnt = 0
    for q in range(start[i * g + j], start[i * g + j + 1]):
        t = items[q]
        ax = P[t, 0, 0] - x
        ay = P[t, 0, 1] - y
        bx = P[t, 1, 0] - x
        by = P[t, 1, 1] - y
        cx = P[t, 2, 0] - x
        cy = P[t, 2, 1] - y
        s0 = ax * by - ay * bx
        s1 = bx * cy - by * cx
        s2 = cx * ay - cy * ax
        hi = max(s0, max(s1, s2))
        lw = min(s0, min(s1, s2))
        if lw < -tol2 and hi > tol2:
            continue                    # clearly outside the projected triangle
        if (lw > tol2) or (hi < -tol2):
            tot = s0 + s1 + s2
            zc = (s1 * P[t, 0, 2] + s2 * P[t, 1, 2] + s0 * P[t, 2, 2]) / tot
            if abs(zc - z) <= tolz:
                return -1
            if zc > z:
                cnt += 1
            continue
        if abs(s0) <= tol2 or abs(s1) <= tol2 or abs(s2) <= tol2:
            return -1                   # ray through an edge or vertex
    return cnt & 1


@njit(cache=True, nogil=True)
def _query_one(qx, qy, qz, Rs, Ps, los, spans, starts, items, g, tol2, tolz):
    r = 0
    for k in range(Rs.shape[0]):
        r = _parity(qx, qy, qz, Rs[k], Ps[k], los[k], spans[k], starts[k], items[k],
                    g, tol2, tolz)
        if r >= 0:
            return r == 1
    return False


@njit(cache=True, nogil=True)
def _query_many(q, packed, g, tol2, tolz):
    Rs, Ps, los, spans, starts, items = packed
    out = np.empty(q.shape[0], dtype=np.bool_)
    for n in range(q.shape[0]):
        out[n] = _query_one(q[n, 0], q[n, 1], q[n, 2], Rs, Ps, los, spans, starts, items,
                            g, tol2, tolz)
    return out


def point_in_mesh(mesh, q):
    """True where ``q`` lies strictly inside the closed mesh (accepts one point or an array)."""
    q = np.asarray(q, dtype=np.float64)
    res = PointInMesh(mesh).contains(q)
    return bool(res[0]) if q.ndim == 1 else res


# ----------------------------------------------------------------------------
# occupancy

@njit(cache=True, nogil=True)
def _tet_sample(P, key):
    """Uniform point in tetrahedron P (4x3) from three sorted uniforms."""
    u0 = uniform(key)
    u1 = uniform(key ^ np.uint64(0x5851F42D4C957F2D))
    u2 = uniform(key ^ np.uint64(0x14057B7EF767814F))
    # sort three values
    if u0 > u1:
        u0, u1 = u1, u0
    if u1 > u2:
        u1, u2 = u2, u1
    if u0 > u1:
        u0, u1 = u1, u0
    w0 = u0
    w1 = u1 - u0
    w2 = u2 - u1
    w3 = 1.0 - u2
    x = w0 * P[0, 0] + w1 * P[1, 0] + w2 * P[2, 0] + w3 * P[3, 0]
    y = w0 * P[0, 1] + w1 * P[1, 1] + w2 * P[2, 1] + w3 * P[3, 1]
    z = w0 * P[0, 2] + w1 * P[1, 2] + w2 * P[2, 2] + w3 * P[3, 2]
    return x, y, z


@njit(cache=True, nogil=True)
def _cell_hits_box(tb_lo, tb_hi, vstart, vitems, vlo, vsize, vg, lo, hi):
    """Whether any triangle bounding box overlaps the box [lo, hi]."""
    i0 = np.empty(3, dtype=np.int64)
    i1 = np.empty(3, dtype=np.int64)
    for k in range(3):
        a = int(np.floor((lo[k] - vlo[k]) / vsize[k]))
        b = int(np.floor((hi[k] - vlo[k]) / vsize[k]))
        if b < 0 or a >= vg[k]:
            return False
        i0[k] = max(a, 0)
        i1[k] = min(b, vg[k] - 1)
    for i in range(i0[0], i1[0] + 1):
        for j in range(i0[1], i1[1] + 1):
            for l in range(i0[2], i1[2] + 1):
                v = (i * vg[1] + j) * vg[2] + l
                for q in range(vstart[v], vstart[v + 1]):
                    t = vitems[q]
                    ok = True
                    for k in range(3):
                        if tb_hi[t, k] < lo[k] or tb_lo[t, k] > hi[k]:
                            ok = False
                            break
                    if ok:
                        return True
    return False


@njit(cache=True, nogil=True)
def _occupancy(pts, cells, fin, lo_c, hi_c, samples, seed, packed, g, tol2, tolz,
               tb_lo, tb_hi, vstart, vitems, vlo, vsize, vg, out):
    Rs, Ps, los, spans, starts, items = packed
    P = np.empty((4, 3))
    bl = np.empty(3)
    bh = np.empty(3)
    for r in range(lo_c, hi_c):
        c = fin[r]
        for s in range(4):
            for k in range(3):
                P[s, k] = pts[cells[c, s], k]
        for k in range(3):
            bl[k] = min(min(P[0, k], P[1, k]), min(P[2, k], P[3, k]))
            bh[k] = max(max(P[0, k], P[1, k]), max(P[2, k], P[3, k]))
        if not _cell_hits_box(tb_lo, tb_hi, vstart, vitems, vlo, vsize, vg, bl, bh):
            # no surface inside the cell's box: the whole cell is on one side
            cx = 0.25 * (P[0, 0] + P[1, 0] + P[2, 0] + P[3, 0])
            cy = 0.25 * (P[0, 1] + P[1, 1] + P[2, 1] + P[3, 1])
            cz = 0.25 * (P[0, 2] + P[1, 2] + P[2, 2] + P[3, 2])
            inside = _query_one(cx, cy, cz, Rs, Ps, los, spans, starts, items, g, tol2, tolz)
            out[c] = 1.0 if inside else 0.0
            continue
        hits = 0
        base = (np.uint64(seed) * np.uint64(0x9E3779B97F4A7C15)) ^ (np.uint64(c) << np.uint64(20))
        for s in range(samples):
            x, y, z = _tet_sample(P, base + np.uint64(s))
            if _query_one(x, y, z, Rs, Ps, los, spans, starts, items, g, tol2, tolz):
                hits += 1
        out[c] = hits / samples


def _voxel_grid(tris):
    lo = tris.min(axis=(0, 1))
    hi = tris.max(axis=(0, 1))
    m = len(tris)
    vg = np.full(3, max(2, int(round(m ** (1 / 3)))), dtype=np.int64)
    size = np.maximum((hi - lo) / vg, 1e-300)
    tb_lo = tris.min(1)
    tb_hi = tris.max(1)
    a = np.clip(np.floor((tb_lo - lo) / size).astype(np.int64), 0, vg - 1)
    b = np.clip(np.floor((tb_hi - lo) / size).astype(np.int64), 0, vg - 1)
    buckets = [[] for _ in range(int(np.prod(vg)))]
    for t in range(m):
        for i in range(a[t, 0], b[t, 0] + 1):
            for j in range(a[t, 1], b[t, 1] + 1):
                for l in range(a[t, 2], b[t, 2] + 1):
                    buckets[(i * vg[1] + j) * vg[2] + l].append(t)
    start = np.zeros(len(buckets) + 1, dtype=np.int64)
    start[1:] = np.cumsum([len(x) for x in buckets])
    items = np.array([t for x in buckets for t in x], dtype=np.int64)
    return tb_lo, tb_hi, start, items, lo, size, vg


def occupancy_ground_truth(tri, mesh, samples_per_cell=100, seed=0, threads=None):
    """Fraction of each cell's volume inside ``mesh``, estimated from uniform samples.

    Cells whose bounding box meets no triangle's bounding box lie entirely on
    one side of the surface and are classified at their centroid.  Infinite
    cells get 0.
    """
    pim = PointInMesh(mesh)
    packed = pim._packed()
    vox = _voxel_grid(mesh.triangles())
    fin = tri.finite_cells().astype(np.int64)
    out = np.zeros(tri.n_cells)

    def work(lo, hi):
        _occupancy(tri.points, tri.cells, fin, lo, hi, int(samples_per_cell), int(seed),
                   packed, pim.g, pim.tol2, pim.tolz, *vox, out)

    run_chunks(work, chunk_bounds(len(fin), threads), threads)
    return out
