import numpy as np
import pytest
from hypothesis import given, strategies as st

from tetrecon.eval import (EmptyMesh, NotWatertight, chamfer, chamfer_points, evaluate, f1_score,
                           precision_recall_f1, sample_surface, volumetric_iou)
from tetrecon.scanner import generate_shape
from tetrecon.trimesh import TriMesh


def _sphere(r, sub=4):
    m = generate_shape("sphere", {"radius": r, "subdivisions": sub})
    return m


def _cube(side, center=0.0):
    m = generate_shape("box", {"size": (side, side, side)})
    return TriMesh(m.vertices + center, m.faces)


def test_single_triangle_samples_inside():
    T = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    pts = sample_surface(TriMesh(T, [[0, 1, 2]]), 1000, seed=1)
    # barycentric coordinates from the 2D system
    A = np.stack([T[1] - T[0], T[2] - T[0]], 1)[:2]
    uv = np.linalg.solve(A, (pts - T[0])[:, :2].T).T
    assert np.all(uv >= -1e-12) and np.all(uv.sum(1) <= 1 + 1e-12)
    assert np.all(pts[:, 2] == 0)


def test_area_split_three_to_one():
    V = np.array([[0, 0, 0], [3, 0, 0], [0, 1, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]], float)
    m = TriMesh(V, [[0, 1, 2], [3, 4, 5]])
    n = 20000
    pts = sample_surface(m, n, seed=2)
    k = np.count_nonzero(pts[:, 0] < 5)
    assert abs(k - 0.75 * n) <= 3 * np.sqrt(n * 0.75 * 0.25)


def test_sphere_samples_on_surface():
    m = _sphere(1.0, 3)
    pts = sample_surface(m, 5000, seed=3)
    T = m.triangles()
    nrm = np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0])
    r_in = np.min(np.einsum("ij,ij->i", nrm / np.linalg.norm(nrm, axis=1)[:, None], T[:, 0]))
    r = np.linalg.norm(pts, axis=1)
    assert np.all(r >= r_in - 1e-9) and np.all(r <= 1 + 1e-9)
    assert abs(r.mean() - 1) <= (1 - r_in) + 1e-9


def test_sampling_deterministic_and_empty():
    m = _sphere(1.0, 2)
    assert np.array_equal(sample_surface(m, 100, 5), sample_surface(m, 100, 5))
    with pytest.raises(EmptyMesh):
        sample_surface(TriMesh(np.zeros((0, 3)), np.zeros((0, 3))), 10)
    with pytest.raises(EmptyMesh):
        sample_surface(TriMesh(np.zeros((3, 3)), [[0, 1, 2]]), 10)


def test_chamfer_identical_zero():
    m = _sphere(1.0, 3)
    assert chamfer(m, m, n=2000, seed=4) == 0.0


def test_chamfer_two_points():
    d = 0.37
    assert chamfer_points([[0, 0, 0]], [[d, 0, 0]]) == pytest.approx(2 * d * d, rel=1e-15)


def test_chamfer_concentric_spheres():
    # every point is 0.1 from the other sphere, in both directions
    c = chamfer(_sphere(1.0, 5), _sphere(1.1, 5), n=100_000, seed=0)
    assert c == pytest.approx(0.02, rel=0.05)


def test_chamfer_symmetric_nonneg():
    a, b = _sphere(1.0, 2), _cube(1.5)
    assert chamfer(a, b, n=3000, seed=9) == chamfer(b, a, n=3000, seed=9) >= 0
    norm = chamfer(a, b, n=3000, seed=9, normalized=True)
    lo, hi = a.bbox()
    assert norm == pytest.approx(100 * chamfer(a, b, n=3000, seed=9) / np.sum((hi - lo) ** 2))


def test_iou_identical_disjoint():
    m = _sphere(1.0, 3)
    assert volumetric_iou(m, m, n=5000, seed=1) == 1.0
    assert volumetric_iou(m, TriMesh(m.vertices + 5.0, m.faces), n=5000, seed=1) == 0.0


def test_iou_nested_cubes():
    n = 100_000
    iou = volumetric_iou(_cube(1.0), _cube(0.5), n=n, seed=0)
    sd = np.sqrt((1 / 8) * (7 / 8) / n)
    assert abs(iou - 1 / 8) <= 2 * sd


def test_iou_monotone_containment():
    a, b, c = _sphere(0.5, 3), _sphere(0.75, 3), _sphere(1.0, 3)
    ab = volumetric_iou(a, b, n=20000, seed=2)
    ac = volumetric_iou(a, c, n=20000, seed=2)
    assert 0 <= ac <= ab <= 1


def test_iou_needs_closed():
    open_mesh = TriMesh(_cube(1.0).vertices, _cube(1.0).faces[:-1])
    with pytest.raises(NotWatertight):
        volumetric_iou(_cube(1.0), open_mesh, n=10)
    rep = evaluate(_cube(1.0), open_mesh, n=500)
    assert rep.iou is None and "odd" in rep.note


def test_f1_analytic():
    assert abs(f1_score(0.8, 0.6) - 24 / 35) <= 1e-9
    assert round(f1_score(0.8, 0.6), 4) == 0.6857
    assert f1_score(1.0, 0.0) == 0.0
    assert f1_score(0.0, 0.0) == 0.0


def test_precision_recall_constructed():
    gt = np.array([[0, 0, 0], [10, 0, 0], [20, 0, 0], [30, 0, 0], [40, 0, 0]], float)
    pred = np.array([[0, 0.1, 0], [10, 0.1, 0], [20, 0.1, 0], [20, -0.1, 0], [0, 50, 0]], float)
    (r,) = precision_recall_f1(gt, pred, [0.5])
    assert r["accuracy"] == 0.8 and r["completeness"] == 0.6
    assert abs(r["f1"] - 24 / 35) <= 1e-9
    (same,) = precision_recall_f1(gt, gt, [1e-6])
    assert same["accuracy"] == same["completeness"] == same["f1"] == 1.0
    with pytest.raises(ValueError):
        precision_recall_f1(gt, pred, [0.0])


@given(st.integers(0, 2 ** 31))
def test_f1_monotone_in_tau(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((50, 3)), rng.random((40, 3)) + 0.2
    taus = np.sort(rng.uniform(0.01, 1.0, 6))
    f = [r["f1"] for r in precision_recall_f1(a, b, taus)]
    assert all(y >= x for x, y in zip(f, f[1:]))
    assert all(0 <= v <= 1 for v in f)


def test_evaluate_report():
    a, b = _sphere(1.0, 3), _sphere(1.05, 3)
    r1 = evaluate(a, b, n=4000, seed=3)
    r2 = evaluate(a, b, n=4000, seed=3)
    assert r1.to_dict() == r2.to_dict()
    d = r1.to_dict()
    assert 0 < d["iou"] <= 1 and d["chamfer"] > 0
    assert [f["tau"] for f in d["fscores"]] == [0.5, 1.0, 2.0, 5.0]
