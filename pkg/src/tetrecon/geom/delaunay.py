"""Incremental 3D Delaunay tetrahedralization with infinite cells.

Cells are stored as ``(m, 4)`` vertex arrays where ``-1`` stands for the
vertex at infinity; ``neighbors[c, i]`` is the cell across the facet opposite
slot ``i``.  Finite cells are positively oriented.  An infinite cell is
oriented as if its infinite vertex were a point outside the hull, so that
substituting any point ``q`` for it gives a positive orientation exactly when
``q`` is strictly beyond the hull facet.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .predicates import _common_ints, insphere_idx, insphere_s, orient3d_exact, orient3d_s

INF = -1

# Facet opposite slot i, wound so its normal points away from vertex i.
FACET_VERTS = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]], dtype=np.int64)


class DegenerateInput(ValueError):
    """Fewer than four distinct points, or all points coplanar."""


@dataclass(eq=False)
class Tetrahedralization:
    points: np.ndarray          # (n, 3) deduplicated vertices
    cells: np.ndarray           # (m, 4) vertex ids, -1 = infinite vertex
    neighbors: np.ndarray       # (m, 4) cell ids
    input_index: np.ndarray     # (n_input,) input point -> vertex id
    vertex_cell: np.ndarray = field(default=None)
    infinite: np.ndarray = field(default=None)

    def __post_init__(self):
        self.infinite = np.any(self.cells == INF, axis=1)
        if self.vertex_cell is None:
            vc = np.full(len(self.points), -1, dtype=np.int64)
            fin = np.nonzero(~self.infinite)[0]
            for slot in range(4):
                vc[self.cells[fin, slot]] = fin
            self.vertex_cell = vc

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_finite(self):
        return int(np.count_nonzero(~self.infinite))

    @property
    def bbox_diagonal(self):
        return float(np.linalg.norm(self.points.max(0) - self.points.min(0)))

    def finite_cells(self):
        return np.nonzero(~self.infinite)[0]

    def facets(self):
        """Unique facets as ``(cell, slot, other_cell, other_slot)`` rows with cell < other_cell."""
        m = self.n_cells
        c = np.repeat(np.arange(m), 4)
        s = np.tile(np.arange(4), m)
        n = self.neighbors.ravel()
        keep = c < n
        c, s, n = c[keep], s[keep], n[keep]
        back = np.argmax(self.neighbors[n] == c[:, None], axis=1)
        return np.stack([c, s, n, back], axis=1)

    def adjacency_csr(self):
        m = self.n_cells
        return np.arange(0, 4 * m + 1, 4, dtype=np.int64), self.neighbors.ravel().astype(np.int64)


# ----------------------------------------------------------------------------
# ordering

def hilbert_keys(pts, bits=10):
    """Hilbert-curve index of each point on a 2^bits grid over the bounding box."""
    pts = np.asarray(pts, dtype=np.float64)
    lo = pts.min(0)
    span = np.maximum(pts.max(0) - lo, 1e-300)
    side = (1 << bits) - 1
    X = np.clip(((pts - lo) / span * side).astype(np.int64), 0, side).T.copy()
    M = 1 << (bits - 1)
    Q = M
    while Q > 1:
        P = Q - 1
        for i in range(3):
            hit = (X[i] & Q) != 0
            X[0][hit] ^= P
            miss = ~hit
            t = (X[0] ^ X[i]) & P
            X[0][miss] ^= t[miss]
            X[i][miss] ^= t[miss]
        Q >>= 1
    for i in range(1, 3):
        X[i] ^= X[i - 1]
    t = np.zeros(X.shape[1], dtype=np.int64)
    Q = M
    while Q > 1:
        t[(X[2] & Q) != 0] ^= Q - 1
        Q >>= 1
    X ^= t
    key = np.zeros(X.shape[1], dtype=np.int64)
    for b in range(bits - 1, -1, -1):
        for i in range(3):
            key = (key << 1) | ((X[i] >> b) & 1)
    return key


def brio_order(pts, seed=0, min_round=64):
    """Biased randomized insertion order: random rounds, each sorted along a Hilbert curve."""
    n = len(pts)
    perm = np.random.default_rng(seed).permutation(n)
    bounds = [n]
    while bounds[-1] > min_round:
        bounds.append(bounds[-1] // 2)
    bounds.append(0)
    bounds = bounds[::-1]
    keys = hilbert_keys(pts)
    out = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        chunk = perm[lo:hi]
        out.append(chunk[np.argsort(keys[chunk], kind="stable")])
    return np.concatenate(out)


# ----------------------------------------------------------------------------
# numba kernels

@njit(cache=True)
def _inf_slot(cells, c):
    for s in range(4):
        if cells[c, s] == INF:
            return s
    return -1


@njit(cache=True)
def _orient_sub(pts, cells, c, slot, qx, qy, qz):
    """orient3d of cell c with the vertex in `slot` replaced by q (other slots finite)."""
    x = np.empty(12)
    for s in range(4):
        if s == slot:
            x[3 * s] = qx
            x[3 * s + 1] = qy
            x[3 * s + 2] = qz
        else:
            v = cells[c, s]
            x[3 * s] = pts[v, 0]
            x[3 * s + 1] = pts[v, 1]
            x[3 * s + 2] = pts[v, 2]
    return orient3d_s(x[0], x[1], x[2], x[3], x[4], x[5],
                      x[6], x[7], x[8], x[9], x[10], x[11])


@njit(cache=True)
def _coplanar_incircle(pts, a, b, c, qx, qy, qz):
    """Sign of q strictly inside the circumcircle of triangle abc (q in its plane)."""
    ax, ay, az = pts[a, 0], pts[a, 1], pts[a, 2]
    ux, uy, uz = pts[b, 0] - ax, pts[b, 1] - ay, pts[b, 2] - az
    vx, vy, vz = pts[c, 0] - ax, pts[c, 1] - ay, pts[c, 2] - az
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    nn = np.sqrt(nx * nx + ny * ny + nz * nz)
    scale = np.sqrt(ux * ux + uy * uy + uz * uz) / nn
    # any point off the plane works: every sphere through a, b, c cuts the plane in the same circle
    for _ in range(8):
        dx = ax + nx * scale
        dy = ay + ny * scale
        dz = az + nz * scale
        o = orient3d_s(ax, ay, az, pts[b, 0], pts[b, 1], pts[b, 2],
                       pts[c, 0], pts[c, 1], pts[c, 2], dx, dy, dz)
        if o != 0:
            break
        scale *= 1024.0
    if o > 0:
        return insphere_s(ax, ay, az, pts[b, 0], pts[b, 1], pts[b, 2],
                          pts[c, 0], pts[c, 1], pts[c, 2], dx, dy, dz, qx, qy, qz)
    return insphere_s(pts[b, 0], pts[b, 1], pts[b, 2], ax, ay, az,
                      pts[c, 0], pts[c, 1], pts[c, 2], dx, dy, dz, qx, qy, qz)


@njit(cache=True)
def _in_conflict(pts, cells, c, qx, qy, qz):
    k = _inf_slot(cells, c)
    if k < 0:
        v0, v1, v2, v3 = cells[c, 0], cells[c, 1], cells[c, 2], cells[c, 3]
        return insphere_s(pts[v0, 0], pts[v0, 1], pts[v0, 2],
                          pts[v1, 0], pts[v1, 1], pts[v1, 2],
                          pts[v2, 0], pts[v2, 1], pts[v2, 2],
                          pts[v3, 0], pts[v3, 1], pts[v3, 2], qx, qy, qz) > 0
    s = _orient_sub(pts, cells, c, k, qx, qy, qz)
    if s > 0:
        return True
    if s < 0:
        return False
    tri = np.empty(3, dtype=np.int64)
    j = 0
    for t in range(4):
        if t != k:
            tri[j] = cells[c, t]
            j += 1
    return _coplanar_incircle(pts, tri[0], tri[1], tri[2], qx, qy, qz) > 0


@njit(cache=True)
def _walk(pts, cells, nbrs, start, qx, qy, qz, state):
    """Stochastic visibility walk. Returns (cell, rng state); an infinite cell means q is outside the hull."""
    c = start
    k = _inf_slot(cells, c)
    if k >= 0:
        c = nbrs[c, k]
    limit = 4 * cells.shape[0] + 16
    for _ in range(limit):
        state = (state * 6364136223846793005 + 1442695040888963407) & 0x7FFFFFFFFFFFFFFF
        r = (state >> 33) & 3
        moved = False
        for t in range(4):
            i = (t + r) & 3
            if _orient_sub(pts, cells, c, i, qx, qy, qz) < 0:
                c = nbrs[c, i]
                moved = True
                break
        if not moved:
            return c, state
        if _inf_slot(cells, c) >= 0:
            return c, state
    return -1, state


@njit(cache=True)
def _grow2(a, fill):
    b = np.full((2 * a.shape[0], a.shape[1]), fill, dtype=a.dtype)
    b[:a.shape[0]] = a
    return b


@njit(cache=True)
def _grow1(a, fill):
    b = np.full(2 * a.shape[0], fill, dtype=a.dtype)
    b[:a.shape[0]] = a
    return b


@njit(cache=True)
def _build(pts, order, init):
    n = pts.shape[0]
    cap = 8 * n + 64
    cells = np.full((cap, 4), -2, dtype=np.int64)
    nbrs = np.full((cap, 4), -1, dtype=np.int64)
    alive = np.zeros(cap, dtype=np.bool_)
    mark = np.zeros(cap, dtype=np.int64)
    free = np.empty(cap, dtype=np.int64)
    nfree = 0

    # initial tetrahedron + its four infinite cells
    for s in range(4):
        cells[0, s] = init[s]
    alive[0] = True
    for i in range(4):
        ci = i + 1
        for s in range(4):
            cells[ci, s] = init[s]
        cells[ci, i] = INF
        # odd permutation of the finite slots keeps the 'infinity outside' orientation
        a = (i + 1) & 3
        b = (i + 2) & 3
        tmp = cells[ci, a]
        cells[ci, a] = cells[ci, b]
        cells[ci, b] = tmp
        alive[ci] = True
    ncells = 5
    for i in range(4):
        nbrs[0, i] = i + 1
        nbrs[i + 1, i] = 0
    # infinite cells are pairwise adjacent across facets containing infinity
    for ci in range(1, 5):
        for s in range(4):
            if cells[ci, s] == INF:
                continue
            # facet opposite slot s contains INF and two finite vertices
            for cj in range(1, 5):
                if cj == ci:
                    continue
                share = 0
                for t in range(4):
                    if t == s:
                        continue
                    v = cells[ci, t]
                    for u in range(4):
                        if cells[cj, u] == v:
                            share += 1
                            break
                if share == 3:
                    nbrs[ci, s] = cj

    cav = np.empty(256, dtype=np.int64)
    stack = np.empty(256, dtype=np.int64)
    bc = np.empty(256, dtype=np.int64)      # boundary: cavity cell
    bs = np.empty(256, dtype=np.int64)      # boundary: slot
    bn = np.empty(256, dtype=np.int64)      # boundary: outside neighbor
    bj = np.empty(256, dtype=np.int64)      # boundary: back slot in neighbor
    bv = np.empty((256, 4), dtype=np.int64)
    newc = np.empty(256, dtype=np.int64)

    stamp = 0
    hint = 0
    state = np.int64(12345)
    for oi in range(order.shape[0]):
        vi = order[oi]
        qx, qy, qz = pts[vi, 0], pts[vi, 1], pts[vi, 2]
        c0, state = _walk(pts, cells, nbrs, hint, qx, qy, qz, state)
        if c0 < 0:
            return cells[:0], nbrs[:0], alive[:0], -1
        stamp += 1
        ncav = 0
        nst = 1
        stack[0] = c0
        mark[c0] = stamp
        nb = 0
        while nst > 0:
            nst -= 1
            c = stack[nst]
            if ncav >= cav.shape[0]:
                cav = _grow1(cav, 0)
            cav[ncav] = c
            ncav += 1
            for i in range(4):
                nn = nbrs[c, i]
                if mark[nn] == stamp:
                    continue
                inside = False
                if mark[nn] != -stamp:
                    if _in_conflict(pts, cells, nn, qx, qy, qz):
                        inside = True
                        mark[nn] = stamp
                        if nst >= stack.shape[0]:
                            stack = _grow1(stack, 0)
                        stack[nst] = nn
                        nst += 1
                    else:
                        mark[nn] = -stamp
                if not inside:
                    if nb >= bc.shape[0]:
                        bc = _grow1(bc, 0)
                        bs = _grow1(bs, 0)
                        bn = _grow1(bn, 0)
                        bj = _grow1(bj, 0)
                        bv = _grow2(bv, 0)
                        newc = _grow1(newc, 0)
                    bc[nb] = c
                    bs[nb] = i
                    bn[nb] = nn
                    for j in range(4):
                        if nbrs[nn, j] == c:
                            bj[nb] = j
                    for j in range(4):
                        bv[nb, j] = cells[c, j]
                    bv[nb, i] = vi
                    nb += 1
        # release cavity
        for k in range(ncav):
            c = cav[k]
            alive[c] = False
            free[nfree] = c
            nfree += 1
        while ncells + nb > cells.shape[0]:
            cells = _grow2(cells, -2)
            nbrs = _grow2(nbrs, -1)
            alive = _grow1(alive, False)
            mark = _grow1(mark, 0)
            free = _grow1(free, 0)
        for k in range(nb):
            if nfree > 0:
                nfree -= 1
                c = free[nfree]
            else:
                c = ncells
                ncells += 1
            newc[k] = c
            alive[c] = True
            mark[c] = 0
            for j in range(4):
                cells[c, j] = bv[k, j]
                nbrs[c, j] = -1
            nbrs[c, bs[k]] = bn[k]
            nbrs[bn[k], bj[k]] = c
        # link new cells across facets containing the new vertex
        big = n + 1
        keys = np.empty(3 * nb, dtype=np.int64)
        own = np.empty(3 * nb, dtype=np.int64)
        slot = np.empty(3 * nb, dtype=np.int64)
        m = 0
        for k in range(nb):
            c = newc[k]
            for j in range(4):
                if j == bs[k]:
                    continue
                u = -1
                w = -1
                for t in range(4):
                    if t == j or t == bs[k]:
                        continue
                    v = cells[c, t]
                    if v == INF:
                        v = n
                    if u < 0:
                        u = v
                    else:
                        w = v
                if u > w:
                    u, w = w, u
                keys[m] = u * big + w
                own[m] = c
                slot[m] = j
                m += 1
        srt = np.argsort(keys)
        for k in range(0, m, 2):
            a = srt[k]
            b = srt[k + 1]
            nbrs[own[a], slot[a]] = own[b]
            nbrs[own[b], slot[b]] = own[a]
        hint = newc[nb - 1]
    return cells[:ncells], nbrs[:ncells], alive[:ncells], 0


@njit(cache=True)
def _locate_many(pts, cells, nbrs, queries, hint):
    out = np.empty(queries.shape[0], dtype=np.int64)
    state = np.int64(987654321)
    h = hint
    for i in range(queries.shape[0]):
        c, state = _walk(pts, cells, nbrs, h, queries[i, 0], queries[i, 1], queries[i, 2], state)
        out[i] = c
        if c >= 0 and _inf_slot(cells, c) < 0:
            h = c
    return out


# ----------------------------------------------------------------------------
# public API

def _dedup(points):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must have shape (n, 3)")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    _, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    # keep vertices in order of first appearance
    rank = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    uniq = pts[np.sort(first)]
    return uniq, rank[inverse.ravel()]


def _collinear_exact(a, b, c):
    ax, ay, az, bx, by, bz, cx, cy, cz = _common_ints((*a, *b, *c))
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    return uy * vz - uz * vy == 0 and uz * vx - ux * vz == 0 and ux * vy - uy * vx == 0


def _initial_simplex(pts, order):
    a = order[0]
    rest = list(order[1:])
    b = None
    for k, i in enumerate(rest):
        if not np.array_equal(pts[i], pts[a]):
            b = rest.pop(k)
            break
    if b is None:
        raise DegenerateInput("fewer than four distinct points")
    c = None
    for k, i in enumerate(rest):
        if not _collinear_exact(pts[a], pts[b], pts[i]):
            c = rest.pop(k)
            break
    if c is None:
        raise DegenerateInput("all points collinear")
    d = None
    for k, i in enumerate(rest):
        if orient3d_exact(*pts[a], *pts[b], *pts[c], *pts[i]) != 0:
            d = rest.pop(k)
            break
    if d is None:
        raise DegenerateInput("all points coplanar")
    init = [a, b, c, d]
    if orient3d_exact(*pts[a], *pts[b], *pts[c], *pts[d]) < 0:
        init = [b, a, c, d]
    return np.array(init, dtype=np.int64), np.array(rest, dtype=np.int64)


def build_delaunay(points, seed=0):
    """Delaunay tetrahedralization of ``points`` (exact-equal duplicates merged).

    Insertion follows a BRIO/Hilbert order drawn from ``seed``; the result is
    deterministic for a given point sequence and seed.
    """
    pts, input_index = _dedup(points)
    if len(pts) < 4:
        raise DegenerateInput("fewer than four distinct points")
    order = brio_order(pts, seed=seed)
    init, rest = _initial_simplex(pts, order)
    cells, nbrs, alive, status = _build(pts, rest, init)
    if status != 0:
        raise RuntimeError("point location failed during insertion")
    keep = np.nonzero(alive)[0]
    remap = np.full(len(cells), -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    cells = cells[keep].copy()
    nbrs = remap[nbrs[keep]]
    return Tetrahedralization(points=pts, cells=cells, neighbors=nbrs, input_index=input_index)


def locate(tri, q, hint=0):
    """Cell containing ``q`` (any incident cell on ties); an infinite cell when outside the hull."""
    q = np.asarray(q, dtype=np.float64).reshape(1, 3)
    return int(_locate_many(tri.points, tri.cells, tri.neighbors, q, int(hint))[0])


def locate_many(tri, queries, hint=0):
    q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
    return _locate_many(tri.points, tri.cells, tri.neighbors, q, int(hint))


def cell_contains(tri, c, q):
    """Closed containment of q in cell c by exact orientation tests.

    For an infinite cell this means q is on or beyond the plane of its hull facet.
    """
    q = np.asarray(q, dtype=np.float64)
    k = _inf_slot(tri.cells, c)
    if k >= 0:
        return _orient_sub(tri.points, tri.cells, c, k, q[0], q[1], q[2]) >= 0
    return all(_orient_sub(tri.points, tri.cells, c, i, q[0], q[1], q[2]) >= 0 for i in range(4))


# ----------------------------------------------------------------------------
# audits

@njit(cache=True)
def _empty_sphere_violations(pts, cells):
    bad = 0
    for c in range(cells.shape[0]):
        if cells[c, 0] < 0 or cells[c, 1] < 0 or cells[c, 2] < 0 or cells[c, 3] < 0:
            continue
        a, b, cc, d = cells[c, 0], cells[c, 1], cells[c, 2], cells[c, 3]
        for v in range(pts.shape[0]):
            if v == a or v == b or v == cc or v == d:
                continue
            if insphere_idx(pts, a, b, cc, d, v) > 0:
                bad += 1
    return bad


def empty_sphere_violations(tri):
    """Count of (finite cell, vertex) pairs with the vertex strictly inside the circumsphere."""
    return int(_empty_sphere_violations(tri.points, tri.cells))


@njit(cache=True)
def _orientation_failures(pts, cells):
    bad = 0
    for c in range(cells.shape[0]):
        if cells[c, 0] < 0 or cells[c, 1] < 0 or cells[c, 2] < 0 or cells[c, 3] < 0:
            continue
        p = cells[c]
        if orient3d_s(pts[p[0], 0], pts[p[0], 1], pts[p[0], 2],
                      pts[p[1], 0], pts[p[1], 1], pts[p[1], 2],
                      pts[p[2], 0], pts[p[2], 1], pts[p[2], 2],
                      pts[p[3], 0], pts[p[3], 1], pts[p[3], 2]) <= 0:
            bad += 1
    return bad


def orientation_failures(tri):
    return int(_orientation_failures(tri.points, tri.cells))


def neighbor_symmetry_failures(tri):
    """Cells whose neighbor does not point back across a facet with the same three vertices."""
    nb = tri.neighbors
    m = tri.n_cells
    c = np.repeat(np.arange(m), 4)
    n = nb.ravel()
    back = nb[n] == c[:, None]
    ok = back.sum(1) == 1
    j = back.argmax(1)
    # facet opposite local vertex i, as a sorted triple
    opp = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    i = np.tile(np.arange(4), m)
    mine = np.sort(np.take_along_axis(tri.cells[c], opp[i], 1), axis=1)
    theirs = np.sort(np.take_along_axis(tri.cells[n], opp[j], 1), axis=1)
    ok &= (mine == theirs).all(1)
    return int(np.count_nonzero(~ok))


def facet_incidence(tri):
    """Map from sorted facet vertex triple to the list of incident cells (brute force)."""
    inc = {}
    for c in range(tri.n_cells):
        for i in range(4):
            key = tuple(sorted(np.delete(tri.cells[c], i).tolist()))
            inc.setdefault(key, []).append(c)
    return inc
