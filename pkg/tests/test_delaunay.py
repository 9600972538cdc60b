import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import ConvexHull

from tetrecon.geom import (DegenerateInput, build_delaunay, cell_contains,
                           empty_sphere_violations, facet_incidence, locate, locate_many,
                           neighbor_symmetry_failures, orientation_failures)
from tetrecon.geom.morphology import morphology_arrays


def _valid(tri):
    assert empty_sphere_violations(tri) == 0
    assert orientation_failures(tri) == 0
    assert neighbor_symmetry_failures(tri) == 0


def test_single_tetra():
    tri = build_delaunay([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert tri.n_finite == 1
    assert tri.n_cells - tri.n_finite == 4
    _valid(tri)


def test_cube_corners():
    pts = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    tri = build_delaunay(pts)
    _valid(tri)
    vol = morphology_arrays(tri.points, tri.cells[tri.finite_cells()])[0].sum()
    assert vol == pytest.approx(1.0, rel=1e-12)


def test_facet_incidence_random():
    rng = np.random.default_rng(3)
    tri = build_delaunay(rng.random((50, 3)))
    _check_incidence(tri)
    _valid(tri)


def _check_incidence(tri):
    inc = facet_incidence(tri)
    assert all(len(cells) == 2 for cells in inc.values())
    hull = [cells for key, cells in inc.items()
            if -1 not in key and any(tri.infinite[c] for c in cells)]
    assert hull
    assert all(sum(tri.infinite[c] for c in cells) == 1 for cells in hull)


def test_grid_cospherical():
    g = np.arange(6, dtype=float)
    pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    tri = build_delaunay(pts)
    _valid(tri)


def test_hull_volume_matches_fan():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(400, 3))
    tri = build_delaunay(pts)
    vol = morphology_arrays(tri.points, tri.cells[tri.finite_cells()])[0].sum()
    assert vol == pytest.approx(ConvexHull(pts).volume, rel=1e-9)


def test_duplicates_merged():
    rng = np.random.default_rng(5)
    pts = rng.random((30, 3))
    tri = build_delaunay(np.concatenate([pts, pts[:10]]))
    assert len(tri.points) == 30
    assert np.array_equal(tri.input_index[30:], tri.input_index[:10])
    assert np.array_equal(tri.points[tri.input_index], np.concatenate([pts, pts[:10]]))


@pytest.mark.parametrize("pts", [
    np.zeros((3, 3)),
    np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [2, 3, 0]], dtype=float),
    np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]], dtype=float),
])
def test_degenerate_inputs(pts):
    with pytest.raises(DegenerateInput):
        build_delaunay(pts)


def test_deterministic():
    rng = np.random.default_rng(6)
    pts = rng.random((200, 3))
    a = build_delaunay(pts)
    b = build_delaunay(pts)
    assert np.array_equal(a.cells, b.cells)
    assert np.array_equal(a.neighbors, b.neighbors)


@given(st.integers(4, 120), st.integers(0, 2**32 - 1),
       st.sampled_from(["uniform", "cluster", "sphere", "grid"]))
def test_delaunay_properties(n, seed, kind):
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        pts = rng.random((n, 3))
    elif kind == "cluster":
        pts = rng.normal(size=(n, 3)) * 1e-3 + rng.integers(0, 3, (n, 1))
    elif kind == "sphere":
        v = rng.normal(size=(n, 3))
        pts = v / np.linalg.norm(v, axis=1, keepdims=True)
    else:
        pts = rng.integers(0, 4, (n, 3)).astype(float)
    try:
        tri = build_delaunay(pts)
    except DegenerateInput:
        return
    _valid(tri)


def test_locate_centroid_and_far(small_tri):
    fin = small_tri.finite_cells()
    for c in fin[:50]:
        q = small_tri.points[small_tri.cells[c]].mean(0)
        assert locate(small_tri, q) == c
    assert small_tri.infinite[locate(small_tri, [10.0, 10.0, 10.0])]


def test_locate_matches_exhaustive(small_tri):
    rng = np.random.default_rng(8)
    q = rng.random((1000, 3)) * 1.2 - 0.1
    found = locate_many(small_tri, q)
    eq = ConvexHull(small_tri.points).equations
    outside = (q @ eq[:, :3].T + eq[:, 3]).max(1)
    for x, c, o in zip(q, found, outside):
        assert cell_contains(small_tri, c, x)
        if small_tri.infinite[c]:
            assert o > -1e-12
        else:
            assert o < 1e-12
