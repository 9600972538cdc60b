import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import insphere_fraction, orient_fraction
from tetrecon.geom import PredicateContractError, in_sphere, orient3d

coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord, coord)


def test_orient_canonical():
    assert orient3d((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)) == 1
    assert orient3d((0, 0, 0), (0, 1, 0), (1, 0, 0), (0, 0, 1)) == -1


def test_orient_coplanar():
    assert orient3d((0, 0, 0), (1, 0, 0), (0, 1, 0), (3.5, -2.0, 0)) == 0


def test_orient_near_degenerate_matches_rational():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b, c = rng.random((3, 3))
        s, t = rng.random(2)
        d = a + s * (b - a) + t * (c - a)
        d = d + rng.choice([-1, 0, 1], 3) * np.spacing(d) * rng.integers(0, 4, 3)
        assert orient3d(a, b, c, d) == orient_fraction(a, b, c, d)


@given(point, point, point, point)
def test_orient_matches_rational(a, b, c, d):
    assert orient3d(a, b, c, d) == orient_fraction(a, b, c, d)


@given(point, point, point, point)
def test_orient_antisymmetric(a, b, c, d):
    assert orient3d(a, b, c, d) == -orient3d(b, a, c, d)


REG = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)


def _positive(t):
    return t if orient3d(*t) > 0 else t[[1, 0, 2, 3]]


def test_insphere_centroid_and_vertex():
    t = _positive(REG)
    assert in_sphere(*t, t.mean(0)) == 1
    assert in_sphere(*t, t[0]) == 0
    assert in_sphere(*t, (10, 10, 10)) == -1


def test_insphere_contract():
    t = _positive(REG)
    with pytest.raises(PredicateContractError):
        in_sphere(t[1], t[0], t[2], t[3], (0, 0, 0))


def test_insphere_random_matches_rational():
    rng = np.random.default_rng(1)
    for _ in range(300):
        t = rng.random((4, 3))
        if orient3d(*t) == 0:
            continue
        t = _positive(t)
        e = rng.random(3)
        assert in_sphere(*t, e) == insphere_fraction(*t, e)


def test_insphere_cospherical_matches_rational():
    # lattice points on the sphere x^2 + y^2 + z^2 = 25, rotated copies are exact
    pts = np.array([[3, 4, 0], [0, 3, 4], [4, 0, 3], [-3, 0, 4], [0, -5, 0],
                    [5, 0, 0], [0, 0, -5], [-4, -3, 0]], dtype=float)
    rng = np.random.default_rng(2)
    for _ in range(200):
        i = rng.choice(len(pts), 5, replace=False)
        t = pts[i[:4]]
        if orient3d(*t) == 0:
            continue
        t = _positive(t)
        assert in_sphere(*t, pts[i[4]]) == insphere_fraction(*t, pts[i[4]]) == 0
