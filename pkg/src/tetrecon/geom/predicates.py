"""Robust orientation and in-sphere predicates.

Every predicate first evaluates a floating-point determinant together with a
static forward error bound (Shewchuk's stage-A bounds).  When the magnitude of
the determinant does not clear the bound, the sign is recomputed exactly with
Python integers, unless every input is a small integer: then the float
stage had no rounding at all and its sign is already exact.  Every double is an integer multiple of a power of two, so the
inputs of one predicate call are rescaled to a common power of two and the
determinant is evaluated without rounding.

Sign conventions
----------------
``orient3d(a, b, c, d)`` is the sign of ``det[b - a; c - a; d - a]``; the
canonical corner tetrahedron ``(0,0,0), (1,0,0), (0,1,0), (0,0,1)`` is
positive.  ``in_sphere(a, b, c, d, e)`` expects ``orient3d(a, b, c, d) > 0``
and is positive when ``e`` lies strictly inside the circumsphere.
"""

import math

import numpy as np
from numba import njit, objmode

_EPS = 2.0**-53
_O3D_BOUND = (7.0 + 56.0 * _EPS) * _EPS
_ISP_BOUND = (16.0 + 224.0 * _EPS) * _EPS


class PredicateContractError(ValueError):
    pass


def _common_ints(values):
    ratios = [float(v).as_integer_ratio() for v in values]
    den = max(d for _, d in ratios)
    return [n * (den // d) for n, d in ratios]


def _sign(x):
    return (x > 0) - (x < 0)


def orient3d_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    """Exact orient3d on doubles via integer arithmetic."""
    (ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz) = _common_ints(
        (ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz))
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    wx, wy, wz = dx - ax, dy - ay, dz - az
    det = (ux * (vy * wz - vz * wy) - uy * (vx * wz - vz * wx)
           + uz * (vx * wy - vy * wx))
    return _sign(det)


def insphere_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, ex, ey, ez):
    """Exact in_sphere on doubles via integer arithmetic (same sign convention)."""
    v = _common_ints((ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, ex, ey, ez))
    ex, ey, ez = v[12], v[13], v[14]
    rows = []
    for k in range(4):
        x, y, z = v[3 * k] - ex, v[3 * k + 1] - ey, v[3 * k + 2] - ez
        rows.append((x, y, z, x * x + y * y + z * z))
    return -_sign(_det4(rows))


def _det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _det4(rows):
    total = 0
    for col in range(4):
        minor = [[r[j] for j in range(4) if j != col] for r in rows[1:]]
        term = rows[0][col] * _det3(minor)
        total += term if col % 2 == 0 else -term
    return total


@njit(cache=True)
def _integer_inputs(vals, max_diff):
    """All inputs are integers below 2**52 (so differences are exact) and differ by <= max_diff."""
    for v in vals:
        if v != math.floor(v) or abs(v) > 2.0**52:
            return False
    for k in range(3):
        lo = vals[k]
        hi = vals[k]
        for j in range(k, len(vals), 3):
            lo = min(lo, vals[j])
            hi = max(hi, vals[j])
        if hi - lo > max_diff:
            return False
    return True


@njit(cache=True)
def orient3d_s(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    # float stage on the d-relative form; the sign is flipped at the end
    adx = ax - dx
    bdx = bx - dx
    cdx = cx - dx
    ady = ay - dy
    bdy = by - dy
    cdy = cy - dy
    adz = az - dz
    bdz = bz - dz
    cdz = cz - dz
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    cdxady = cdx * ady
    adxcdy = adx * cdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    det = (adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy)
           + cdz * (adxbdy - bdxady))
    perm = ((abs(bdxcdy) + abs(cdxbdy)) * abs(adz)
            + (abs(cdxady) + abs(adxcdy)) * abs(bdz)
            + (abs(adxbdy) + abs(bdxady)) * abs(cdz))
    bound = _O3D_BOUND * perm
    if det > bound:
        return -1
    if -det > bound:
        return 1
    # integer stage: products stay below 2**52 and every sum below perm < 2**53
    if perm < 2.0**53 and _integer_inputs((ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz),
                                          2.0**26):
        return 1 if det < 0 else (-1 if det > 0 else 0)
    s = 0
    with objmode(s='int64'):
        s = orient3d_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz)
    return s


@njit(cache=True)
def insphere_s(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, ex, ey, ez):
    aex = ax - ex
    bex = bx - ex
    cex = cx - ex
    dex = dx - ex
    aey = ay - ey
    bey = by - ey
    cey = cy - ey
    dey = dy - ey
    aez = az - ez
    bez = bz - ez
    cez = cz - ez
    dez = dz - ez

    aexbey = aex * bey
    bexaey = bex * aey
    ab = aexbey - bexaey
    bexcey = bex * cey
    cexbey = cex * bey
    bc = bexcey - cexbey
    cexdey = cex * dey
    dexcey = dex * cey
    cd = cexdey - dexcey
    dexaey = dex * aey
    aexdey = aex * dey
    da = dexaey - aexdey
    aexcey = aex * cey
    cexaey = cex * aey
    ac = aexcey - cexaey
    bexdey = bex * dey
    dexbey = dex * bey
    bd = bexdey - dexbey

    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da

    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez

    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)

    aezp = abs(aez)
    bezp = abs(bez)
    cezp = abs(cez)
    dezp = abs(dez)
    abp = abs(aexbey) + abs(bexaey)
    bcp = abs(bexcey) + abs(cexbey)
    cdp = abs(cexdey) + abs(dexcey)
    dap = abs(dexaey) + abs(aexdey)
    acp = abs(aexcey) + abs(cexaey)
    bdp = abs(bexdey) + abs(dexbey)
    perm = ((cdp * bezp + bdp * cezp + bcp * dezp) * alift
            + (dap * cezp + acp * dezp + cdp * aezp) * blift
            + (abp * dezp + bdp * aezp + dap * bezp) * clift
            + (bcp * aezp + acp * bezp + abp * cezp) * dlift)
    bound = _ISP_BOUND * perm
    if det > bound:
        return -1
    if -det > bound:
        return 1
    # integer stage: cubic terms stay below 2**53 and every lifted sum below perm
    if perm < 2.0**53 and _integer_inputs((ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz,
                                           ex, ey, ez), 2.0**16):
        return -1 if det > 0 else (1 if det < 0 else 0)
    s = 0
    with objmode(s='int64'):
        s = insphere_exact(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz,
                           ex, ey, ez)
    return s


@njit(cache=True)
def orient3d_idx(pts, i, j, k, l):
    return orient3d_s(pts[i, 0], pts[i, 1], pts[i, 2],
                      pts[j, 0], pts[j, 1], pts[j, 2],
                      pts[k, 0], pts[k, 1], pts[k, 2],
                      pts[l, 0], pts[l, 1], pts[l, 2])


@njit(cache=True)
def insphere_idx(pts, i, j, k, l, m):
    return insphere_s(pts[i, 0], pts[i, 1], pts[i, 2],
                      pts[j, 0], pts[j, 1], pts[j, 2],
                      pts[k, 0], pts[k, 1], pts[k, 2],
                      pts[l, 0], pts[l, 1], pts[l, 2],
                      pts[m, 0], pts[m, 1], pts[m, 2])


def _xyz(p):
    a = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("predicate inputs must be finite")
    return float(a[0]), float(a[1]), float(a[2])


def orient3d(a, b, c, d):
    """Sign of det[b - a; c - a; d - a], evaluated exactly."""
    return int(orient3d_s(*_xyz(a), *_xyz(b), *_xyz(c), *_xyz(d)))


def in_sphere(a, b, c, d, e):
    """+1 if ``e`` is strictly inside the circumsphere of ``abcd``, 0 on it, -1 outside.

    Raises PredicateContractError unless ``orient3d(a, b, c, d) > 0``.
    """
    pa, pb, pc, pd = _xyz(a), _xyz(b), _xyz(c), _xyz(d)
    if orient3d_s(*pa, *pb, *pc, *pd) <= 0:
        raise PredicateContractError("in_sphere requires a positively oriented tetrahedron")
    return int(insphere_s(*pa, *pb, *pc, *pd, *_xyz(e)))
