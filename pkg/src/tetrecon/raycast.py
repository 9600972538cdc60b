"""Segment traversal through a tetrahedralization and per-cell visibility statistics.

The walk decides which facet a line leaves a cell through with exact
orientation tests of the line against the facet edges; only the interval
parameters are floating point.  A line that passes exactly through an edge or
vertex is detected (a zero sign) and handled by nudging the segment origin.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .geom.delaunay import FACET_VERTS, INF, _inf_slot, _orient_sub, _walk
from ._hash import splitmix
from .geom.predicates import orient3d_s
from .parallel import chunk_bounds, run_chunks

LV, LF, RV, RF = 0, 1, 2, 3
SET_NAMES = ("Lv", "Lf", "Rv", "Rf")

NUDGE = 1e-12
MAX_RETRIES = 3
RAY_CELLS = 2

# walk status codes
_OK = 0
_DEGENERATE = 1


@dataclass
class VisibilityStats:
    counts: np.ndarray      # (n_cells, 4) int64, Lv/Lf/Rv/Rf
    min_lens: np.ndarray    # (n_cells, 4) float64, 0 where the count is 0

    def merge(self, other):
        counts = self.counts + other.counts
        a = np.where(self.counts > 0, self.min_lens, np.inf)
        b = np.where(other.counts > 0, other.min_lens, np.inf)
        m = np.minimum(a, b)
        return VisibilityStats(counts, np.where(counts > 0, m, 0.0))


@dataclass(frozen=True)
class Sighting:
    camera: np.ndarray
    point_ref: int


# ----------------------------------------------------------------------------
# hull facets for entering the triangulation from outside

def hull_facets(tri):
    """Outward hull facet planes: (infinite cell ids, normals, a point on each)."""
    cached = getattr(tri, "_hull_cache", None)
    if cached is not None:
        return cached
    inf_cells = np.nonzero(tri.infinite)[0]
    normals = np.empty((len(inf_cells), 3))
    origins = np.empty((len(inf_cells), 3))
    for r, hc in enumerate(inf_cells):
        k = int(np.nonzero(tri.cells[hc] == INF)[0][0])
        fc = tri.neighbors[hc, k]
        j = int(np.nonzero(tri.neighbors[fc] == hc)[0][0])
        x, y, z = tri.points[tri.cells[fc, FACET_VERTS[j]]]
        normals[r] = np.cross(y - x, z - x)
        origins[r] = x
    tri._hull_cache = (inf_cells.astype(np.int64), normals, origins)
    return tri._hull_cache


# ----------------------------------------------------------------------------
# kernels

@njit(cache=True, nogil=True)
def _edge(pts, la, lb, x, y):
    return orient3d_s(la[0], la[1], la[2], lb[0], lb[1], lb[2],
                      pts[x, 0], pts[x, 1], pts[x, 2], pts[y, 0], pts[y, 1], pts[y, 2])


@njit(cache=True, nogil=True)
def _crossing(pts, cells, c, i, la, lb, fv):
    """Smallest edge sign of the line la->lb against facet i of c (+1: crosses it outward)."""
    x = cells[c, fv[i, 0]]
    y = cells[c, fv[i, 1]]
    z = cells[c, fv[i, 2]]
    s1 = _edge(pts, la, lb, x, y)
    s2 = _edge(pts, la, lb, y, z)
    s3 = _edge(pts, la, lb, z, x)
    lo = min(s1, min(s2, s3))
    hi = max(s1, max(s2, s3))
    if lo > 0:
        return 1
    if hi < 0:
        return -1
    if lo == 0 and hi >= 0:
        return 0     # through an edge or vertex of the facet, or ambiguous
    return -2        # line misses the facet


@njit(cache=True, nogil=True)
def _plane_t(pts, cells, c, i, la, lb, fv):
    x = cells[c, fv[i, 0]]
    y = cells[c, fv[i, 1]]
    z = cells[c, fv[i, 2]]
    ux = pts[y, 0] - pts[x, 0]
    uy = pts[y, 1] - pts[x, 1]
    uz = pts[y, 2] - pts[x, 2]
    vx = pts[z, 0] - pts[x, 0]
    vy = pts[z, 1] - pts[x, 1]
    vz = pts[z, 2] - pts[x, 2]
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    num = nx * (pts[x, 0] - la[0]) + ny * (pts[x, 1] - la[1]) + nz * (pts[x, 2] - la[2])
    den = nx * (lb[0] - la[0]) + ny * (lb[1] - la[1]) + nz * (lb[2] - la[2])
    if den <= 0.0:
        return np.inf
    return num / den


@njit(cache=True, nogil=True)
def _back_slot(nbrs, n, c):
    for j in range(4):
        if nbrs[n, j] == c:
            return j
    return -1


@njit(cache=True, nogil=True)
def _reserve(bc, b0, b1, cnt, need):
    """Grow the three parallel buffers together so they hold at least ``need`` entries."""
    if need <= bc.shape[0]:
        return bc, b0, b1
    size = max(need, 2 * bc.shape[0])
    nc = np.empty(size, dtype=np.int64)
    n0 = np.empty(size)
    n1 = np.empty(size)
    nc[:cnt] = bc[:cnt]
    n0[:cnt] = b0[:cnt]
    n1[:cnt] = b1[:cnt]
    return nc, n0, n1


@njit(cache=True, nogil=True)
def _push(bc, b0, b1, cnt, c, t0, t1):
    bc, b0, b1 = _reserve(bc, b0, b1, cnt, cnt + 1)
    bc[cnt] = c
    b0[cnt] = t0
    b1[cnt] = t1
    return bc, b0, b1, cnt + 1


@njit(cache=True, nogil=True)
def _cone_cell(pts, cells, nbrs, vertex_cell, v, q, want):
    """Cell of star(v) whose cone at v holds the direction selected by q.

    want=+1 selects the cone pointing at q, want=-1 the cone pointing away from q.
    Returns (cell, status); an infinite cell means the direction leaves the hull.
    """
    start = vertex_cell[v]
    stack = np.empty(64, dtype=np.int64)
    seen = np.empty(256, dtype=np.int64)
    nseen = 1
    seen[0] = start
    stack[0] = start
    nst = 1
    boundary = False
    first_inf = -1
    best_inf = -1
    while nst > 0:
        nst -= 1
        c = stack[nst]
        k = -1
        for s in range(4):
            if cells[c, s] == v:
                k = s
        ks = _inf_slot(cells, c)
        if ks < 0:
            ok = True
            onb = True
            for i in range(4):
                if i == k:
                    continue
                o = _orient_sub(pts, cells, c, i, q[0], q[1], q[2]) * want
                if o <= 0:
                    ok = False
                if o < 0:
                    onb = False
            if ok:
                return c, _OK
            if onb:
                boundary = True
        else:
            if first_inf < 0:
                first_inf = c
            if best_inf < 0 and _orient_sub(pts, cells, c, ks, q[0], q[1], q[2]) * want > 0:
                best_inf = c
        for i in range(4):
            if i == k:
                continue
            n = nbrs[c, i]
            dup = False
            for r in range(nseen):
                if seen[r] == n:
                    dup = True
                    break
            if dup:
                continue
            if nseen >= seen.shape[0]:
                tmp = np.empty(2 * seen.shape[0], dtype=np.int64)
                tmp[:nseen] = seen[:nseen]
                seen = tmp
            seen[nseen] = n
            nseen += 1
            if nst >= stack.shape[0]:
                tmp = np.empty(2 * stack.shape[0], dtype=np.int64)
                tmp[:nst] = stack[:nst]
                stack = tmp
            stack[nst] = n
            nst += 1
    if boundary:
        return -1, _DEGENERATE
    if best_inf >= 0:
        return best_inf, _OK
    return first_inf, _OK


@njit(cache=True, nogil=True)
def _line_walk(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o,
               la, lb, sv, from_end, t0, t_end, max_cells, relaxed, hint, fv,
               bc, b0, b1):
    """Walk the line la + t (lb - la) for t in [t0, t_end].

    sv >= 0 starts at vertex sv, which must equal la (from_end False) or lb
    (from_end True).  The walk stops at lb when t_end == 1, when max_cells
    cells have been emitted, or after the first infinite cell.
    """
    cnt = 0
    j = -1           # entry slot
    forced = -1      # exit slot known in advance
    t_in = t0
    skip_first = False
    if sv >= 0:
        if from_end:
            c, st = _cone_cell(pts, cells, nbrs, vertex_cell, sv, la, -1)
        else:
            c, st = _cone_cell(pts, cells, nbrs, vertex_cell, sv, lb, 1)
        if st != _OK:
            return bc, b0, b1, 0, st
        if _inf_slot(cells, c) >= 0:
            bc, b0, b1, cnt = _push(bc, b0, b1, cnt, c, t0, t_end)
            return bc, b0, b1, cnt, _OK
        for s in range(4):
            if cells[c, s] == sv:
                forced = s
    else:
        state = np.int64(2463534242)
        c, state = _walk(pts, cells, nbrs, hint, la[0], la[1], la[2], state)
        ks = _inf_slot(cells, c)
        if ks >= 0:
            # enter the hull from outside (Cyrus-Beck on the hull planes)
            tmax = t_end
            t_enter = -np.inf
            f_in = -1
            dx = lb[0] - la[0]
            dy = lb[1] - la[1]
            dz = lb[2] - la[2]
            miss = False
            for f in range(hull_c.shape[0]):
                nx, ny, nz = hull_n[f, 0], hull_n[f, 1], hull_n[f, 2]
                den = nx * dx + ny * dy + nz * dz
                num = (nx * (hull_o[f, 0] - la[0]) + ny * (hull_o[f, 1] - la[1])
                       + nz * (hull_o[f, 2] - la[2]))
                if den > 0.0:
                    tmax = min(tmax, num / den)
                elif den < 0.0:
                    t = num / den
                    if t > t_enter:
                        t_enter = t
                        f_in = f
                elif num < 0.0:
                    miss = True
            tmin = max(t0, t_enter)
            if miss or f_in < 0 or tmin >= tmax:
                bc, b0, b1, cnt = _push(bc, b0, b1, cnt, c, t0, t_end)
                return bc, b0, b1, cnt, _OK
            hc = hull_c[f_in]
            fc = nbrs[hc, _inf_slot(cells, hc)]
            jj = _back_slot(nbrs, fc, hc)
            if _crossing(pts, cells, fc, jj, la, lb, fv) != -1 and not relaxed:
                return bc, b0, b1, 0, _DEGENERATE
            bc, b0, b1, cnt = _push(bc, b0, b1, cnt, hc, t0, tmin)
            if cnt >= max_cells:
                return bc, b0, b1, cnt, _OK
            c = fc
            j = jj
            t_in = tmin
        else:
            skip_first = True

    while True:
        # stop when the endpoint lies in the closed cell
        if t_end == 1.0:
            inside = True
            for i in range(4):
                if i == j:
                    continue
                if _orient_sub(pts, cells, c, i, lb[0], lb[1], lb[2]) < 0:
                    inside = False
                    break
            if inside:
                bc, b0, b1, cnt = _push(bc, b0, b1, cnt, c, t_in, t_end)
                return bc, b0, b1, cnt, _OK
        ex = forced
        if ex < 0:
            fallback = -1
            for i in range(4):
                if i == j:
                    continue
                s = _crossing(pts, cells, c, i, la, lb, fv)
                if s == 1:
                    ex = i
                    break
                if s == 0 and fallback < 0:
                    fallback = i
            if ex < 0:
                if not relaxed or fallback < 0:
                    return bc, b0, b1, cnt, _DEGENERATE
                ex = fallback
        forced = -1
        t_out = _plane_t(pts, cells, c, ex, la, lb, fv)
        if t_out < t_in:
            t_out = t_in
        if t_out > t_end:
            t_out = t_end
        emit = True
        if skip_first:
            skip_first = False
            # origin exactly on the exit facet: zero-length piece
            if _orient_sub(pts, cells, c, ex, la[0], la[1], la[2]) == 0:
                emit = False
                t_out = t_in
        if emit:
            bc, b0, b1, cnt = _push(bc, b0, b1, cnt, c, t_in, t_out)
            if cnt >= max_cells:
                return bc, b0, b1, cnt, _OK
        n = nbrs[c, ex]
        if _inf_slot(cells, n) >= 0:
            bc, b0, b1, cnt = _push(bc, b0, b1, cnt, n, t_out, t_end)
            return bc, b0, b1, cnt, _OK
        j = _back_slot(nbrs, n, c)
        c = n
        t_in = t_out


@njit(cache=True, nogil=True)
def _nudge_dir(index, attempt):
    out = np.empty(3)
    key = np.uint64(index) * np.uint64(4) + np.uint64(attempt)
    norm = 0.0
    for k in range(3):
        key = splitmix(key)
        u = (key >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        out[k] = 2.0 * u - 1.0
        norm += out[k] * out[k]
    norm = np.sqrt(norm)
    if norm == 0.0:
        out[0] = 1.0
        norm = 1.0
    for k in range(3):
        out[k] /= norm
    return out


@njit(cache=True, nogil=True)
def _vertex_at(pts, cells, c, q):
    for s in range(4):
        v = cells[c, s]
        if v >= 0 and pts[v, 0] == q[0] and pts[v, 1] == q[1] and pts[v, 2] == q[2]:
            return v
    return -1


@njit(cache=True, nogil=True)
def _traverse(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o, a, b, index, step, fv):
    bc = np.empty(32, dtype=np.int64)
    b0 = np.empty(32)
    b1 = np.empty(32)
    la = a.copy()
    cnt = 0
    st = _DEGENERATE
    for attempt in range(MAX_RETRIES + 1):
        state = np.int64(7)
        c, state = _walk(pts, cells, nbrs, 0, la[0], la[1], la[2], state)
        sv = _vertex_at(pts, cells, c, la)
        relaxed = attempt == MAX_RETRIES
        bc, b0, b1, cnt, st = _line_walk(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o,
                                         la, b, sv, False, 0.0, 1.0, 1 << 40, relaxed, c, fv,
                                         bc, b0, b1)
        if st == _OK:
            break
        d = _nudge_dir(index, attempt)
        for k in range(3):
            la[k] = a[k] + step * d[k]
    return bc[:cnt].copy(), b0[:cnt].copy(), b1[:cnt].copy(), st


@njit(cache=True, nogil=True)
def _classify(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o, cam, p, index, step, fv,
              bc, b0, b1, tags, lens):
    """Visibility tags of one sighting; fills (cells, tags, lens) and returns the count."""
    pp = pts[p].copy()
    c = cam.copy()
    n_los = 0
    st = _DEGENERATE
    for attempt in range(MAX_RETRIES + 1):
        relaxed = attempt == MAX_RETRIES
        bc, b0, b1, n_los, st = _line_walk(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o,
                                           pp, c, p, False, 0.0, 1.0, 1 << 40, relaxed, 0, fv,
                                           bc, b0, b1)
        if st == _OK:
            break
        d = _nudge_dir(index, attempt)
        for k in range(3):
            c[k] = cam[k] + step * d[k]
    length = np.sqrt((c[0] - pp[0]) ** 2 + (c[1] - pp[1]) ** 2 + (c[2] - pp[2]) ** 2)
    if tags.shape[0] < n_los + RAY_CELLS:
        tags = np.empty(2 * (n_los + RAY_CELLS), dtype=np.int64)
        lens = np.empty(2 * (n_los + RAY_CELLS))
    for r in range(n_los):
        v = bc[r]
        isv = False
        for s in range(4):
            if cells[v, s] == p:
                isv = True
        tags[r] = LV if isv else LF
        lens[r] = b1[r] * length
    # ray beyond p, along the (possibly nudged) line of sight
    rc = np.empty(RAY_CELLS, dtype=np.int64)
    r0 = np.empty(RAY_CELLS)
    r1 = np.empty(RAY_CELLS)
    bc2, r0, r1, n_ray, st2 = _line_walk(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o,
                                         c, pp, p, True, 1.0, np.inf, RAY_CELLS, True, 0, fv,
                                         rc, r0, r1)
    total = n_los
    bc, b0, b1 = _reserve(bc, b0, b1, n_los, n_los + RAY_CELLS)
    for r in range(n_ray):
        v = bc2[r]
        isv = False
        for s in range(4):
            if cells[v, s] == p:
                isv = True
        bc[total] = v
        tags[total] = RV if isv else RF
        lens[total] = (r1[r] - 1.0) * length
        total += 1
    return bc, b0, b1, tags, lens, total


@njit(cache=True, nogil=True)
def _accumulate(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o, cams, pidx, lo, hi,
                step, fv, counts, mins):
    bc = np.empty(64, dtype=np.int64)
    b0 = np.empty(64)
    b1 = np.empty(64)
    tags = np.empty(64, dtype=np.int64)
    lens = np.empty(64)
    for s in range(lo, hi):
        bc, b0, b1, tags, lens, total = _classify(pts, cells, nbrs, vertex_cell, hull_c, hull_n,
                                                  hull_o, cams[s], pidx[s], s, step, fv,
                                                  bc, b0, b1, tags, lens)
        for r in range(total):
            c = bc[r]
            if _inf_slot(cells, c) >= 0:
                continue
            k = tags[r]
            counts[c, k] += 1
            if lens[r] < mins[c, k]:
                mins[c, k] = lens[r]


@njit(cache=True, nogil=True)
def _labatut(pts, cells, nbrs, vertex_cell, hull_c, hull_n, hull_o, cams, pidx, step, fv,
             alpha, sigma, inside, outside):
    bc = np.empty(64, dtype=np.int64)
    b0 = np.empty(64)
    b1 = np.empty(64)
    tags = np.empty(64, dtype=np.int64)
    lens = np.empty(64)
    inv = 1.0 / (2.0 * sigma * sigma)
    for s in range(cams.shape[0]):
        bc, b0, b1, tags, lens, total = _classify(pts, cells, nbrs, vertex_cell, hull_c, hull_n,
                                                  hull_o, cams[s], pidx[s], s, step, fv,
                                                  bc, b0, b1, tags, lens)
        for r in range(total):
            c = bc[r]
            if _inf_slot(cells, c) >= 0:
                continue
            w = alpha * (1.0 - np.exp(-lens[r] * lens[r] * inv))
            if tags[r] <= LF:
                outside[c] += w
            else:
                inside[c] += w


# ----------------------------------------------------------------------------
# public API

def _args(tri):
    hc, hn, ho = hull_facets(tri)
    return tri.points, tri.cells, tri.neighbors, tri.vertex_cell, hc, hn, ho


def _step(tri):
    return NUDGE * tri.bbox_diagonal


def traverse_segment(tri, a, b, index=0):
    """Cells crossed by the segment a->b as ``[(cell, t_entry, t_exit), ...]``.

    Portions outside the convex hull are reported as infinite cells.
    """
    a = np.asarray(a, dtype=np.float64).reshape(3)
    b = np.asarray(b, dtype=np.float64).reshape(3)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints must differ")
    c, t0, t1, _ = _traverse(*_args(tri), a, b, int(index), _step(tri), FACET_VERTS)
    return [(int(x), float(y), float(z)) for x, y, z in zip(c, t0, t1)]


def _sighting_arrays(tri, cameras, point_refs):
    cams = np.ascontiguousarray(cameras, dtype=np.float64).reshape(-1, 3)
    pidx = np.ascontiguousarray(point_refs, dtype=np.int64).ravel()
    if len(cams) != len(pidx):
        raise ValueError("cameras and point_refs differ in length")
    if not np.all(np.isfinite(cams)):
        raise ValueError("camera coordinates must be finite")
    if len(pidx) and (pidx.min() < 0 or pidx.max() >= len(tri.points)):
        raise ValueError("point_ref out of range")
    return cams, pidx


def classify_sighting(tri, camera, point_ref, index=0):
    """Visibility tags of one sighting as ``[(cell, set_name, len), ...]``.

    Line-of-sight cells come first, ordered from the point toward the camera,
    followed by at most two ray cells behind the point.  Infinite cells are
    included in the walk but carry no statistics downstream.
    """
    cam, pidx = _sighting_arrays(tri, camera, [point_ref])
    bc, _, _, tags, lens, total = _classify(
        *_args(tri), cam[0], pidx[0], int(index), _step(tri), FACET_VERTS,
        np.empty(16, dtype=np.int64), np.empty(16), np.empty(16),
        np.empty(16, dtype=np.int64), np.empty(16))
    return [(int(bc[r]), SET_NAMES[tags[r]], float(lens[r])) for r in range(total)]


def accumulate_visibility(tri, cameras, point_refs, threads=None):
    """Per-cell counts and minimum lengths of the four visibility sets.

    Sightings are split into chunks processed independently; partial results
    are merged by summing counts and taking minima, so the output does not
    depend on the thread count.
    """
    cams, pidx = _sighting_arrays(tri, cameras, point_refs)
    m = tri.n_cells
    args = _args(tri)
    step = _step(tri)
    bounds = chunk_bounds(len(pidx), threads)

    def work(lo, hi):
        counts = np.zeros((m, 4), dtype=np.int64)
        mins = np.full((m, 4), np.inf)
        _accumulate(*args, cams, pidx, lo, hi, step, FACET_VERTS, counts, mins)
        return counts, mins

    counts = np.zeros((m, 4), dtype=np.int64)
    mins = np.full((m, 4), np.inf)
    for c, mn in run_chunks(work, bounds, threads):
        counts += c
        np.minimum(mins, mn, out=mins)
    return VisibilityStats(counts, np.where(counts > 0, mins, 0.0))


def labatut_evidence(tri, cameras, point_refs, sigma, alpha):
    """Accumulated (inside, outside) evidence with weight alpha (1 - exp(-len^2 / 2 sigma^2))."""
    cams, pidx = _sighting_arrays(tri, cameras, point_refs)
    inside = np.zeros(tri.n_cells)
    outside = np.zeros(tri.n_cells)
    _labatut(*_args(tri), cams, pidx, _step(tri), FACET_VERTS, float(alpha), float(sigma),
             inside, outside)
    return inside, outside
