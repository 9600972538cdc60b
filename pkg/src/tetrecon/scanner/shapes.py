"""Procedural watertight test shapes."""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from skimage.measure import marching_cubes

from ..trimesh import TriMesh

SHAPE_KINDS = ("sphere", "box", "ellipsoid", "torus", "union-of-spheres")


class InvalidParams(ValueError):
    pass


def icosphere(subdivisions=3):
    t = (1.0 + 5 ** 0.5) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=np.float64)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]], dtype=np.int64)
    v /= np.linalg.norm(v, axis=1)[:, None]
    for _ in range(subdivisions):
        verts = list(v)
        cache = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v = np.array(verts)
        f = np.array(nf, dtype=np.int64)
    return TriMesh(v, f)


def box(size=(1.0, 1.0, 1.0)):
    sx, sy, sz = size
    v = np.array([[x, y, z] for x in (0, sx) for y in (0, sy) for z in (0, sz)], dtype=np.float64)
    v -= np.array(size) / 2.0
    # vertex index = 4*ix + 2*iy + iz
    f = np.array([[0, 1, 3], [0, 3, 2],        # x = 0
                  [4, 6, 7], [4, 7, 5],        # x = 1
                  [0, 4, 5], [0, 5, 1],        # y = 0
                  [2, 3, 7], [2, 7, 6],        # y = 1
                  [0, 2, 6], [0, 6, 4],        # z = 0
                  [1, 5, 7], [1, 7, 3]],       # z = 1
                 dtype=np.int64)
    return TriMesh(v, f)


def torus(major=1.0, minor=0.3, n_major=64, n_minor=32):
    u = 2 * np.pi * np.arange(n_major) / n_major
    w = 2 * np.pi * np.arange(n_minor) / n_minor
    U, W = np.meshgrid(u, w, indexing="ij")
    x = (major + minor * np.cos(W)) * np.cos(U)
    y = (major + minor * np.cos(W)) * np.sin(U)
    z = minor * np.sin(W)
    v = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * n_minor + j
    b = ((i + 1) % n_major) * n_minor + j
    c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
    d = i * n_minor + (j + 1) % n_minor
    f = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriMesh(v, f)


def union_of_spheres(seed=0, count=4, resolution=48):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-0.6, 0.6, (count, 3))
    radii = rng.uniform(0.35, 0.6, count)
    # chain the spheres so the union stays connected
    for k in range(1, count):
        d = centers[k] - centers[k - 1]
        dist = np.linalg.norm(d)
        limit = 0.8 * (radii[k] + radii[k - 1])
        if dist > limit:
            centers[k] = centers[k - 1] + d / dist * limit
    lo = (centers - radii[:, None]).min(0) - 0.1
    hi = (centers + radii[:, None]).max(0) + 0.1
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([X, Y, Z], axis=-1)
    d = np.linalg.norm(grid[..., None, :] - centers, axis=-1) - radii
    # smooth minimum (log-sum-exp) rounds the creases where spheres meet
    k = 0.05
    dmin = d.min(-1)
    sdf = dmin - k * np.log(np.exp(-(d - dmin[..., None]) / k).sum(-1))
    spacing = tuple((hi - lo) / (resolution - 1))
    verts, faces, _, _ = marching_cubes(sdf, level=0.0, spacing=spacing)
    mesh = largest_component(TriMesh(verts + lo, faces))
    if mesh.signed_volume() < 0:
        mesh = TriMesh(mesh.vertices, mesh.faces[:, ::-1])
    return mesh


def largest_component(mesh):
    n = len(mesh.vertices)
    f = mesh.faces
    A = coo_matrix((np.ones(3 * len(f)), (f.ravel(), f[:, [1, 2, 0]].ravel())), shape=(n, n))
    _, label = connected_components(A, directed=False)
    keep = label[f[:, 0]] == np.argmax(np.bincount(label[f[:, 0]]))
    f = f[keep]
    used = np.unique(f)
    remap = np.full(n, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(mesh.vertices[used], remap[f])


def generate_shape(kind, params=None, seed=0):
    """Closed, outward-oriented triangle mesh of a procedural shape.

    ``params`` by kind: sphere {radius, subdivisions}; box {size};
    ellipsoid {radii, subdivisions}; torus {major, minor}; union-of-spheres
    {count, resolution}.  ``seed`` only affects union-of-spheres.
    """
    p = dict(params or {})
    if kind == "sphere":
        r = float(p.pop("radius", 1.0))
        sub = int(p.pop("subdivisions", 3))
        if r <= 0 or sub < 0:
            raise InvalidParams("sphere needs radius > 0 and subdivisions >= 0")
        m = icosphere(sub)
        m = TriMesh(m.vertices * r, m.faces)
    elif kind == "box":
        size = tuple(float(s) for s in p.pop("size", (1.0, 1.0, 1.0)))
        if len(size) != 3 or min(size) <= 0:
            raise InvalidParams("box size must be three positive lengths")
        m = box(size)
    elif kind == "ellipsoid":
        radii = np.asarray(p.pop("radii", (1.0, 0.7, 0.5)), dtype=np.float64)
        sub = int(p.pop("subdivisions", 3))
        if radii.shape != (3,) or radii.min() <= 0:
            raise InvalidParams("ellipsoid radii must be three positive lengths")
        s = icosphere(sub)
        m = TriMesh(s.vertices * radii, s.faces)
    elif kind == "torus":
        R = float(p.pop("major", 1.0))
        r = float(p.pop("minor", 0.3))
        if not (0 < r < R):
            raise InvalidParams("torus needs 0 < minor < major")
        m = torus(R, r, int(p.pop("n_major", 64)), int(p.pop("n_minor", 32)))
    elif kind == "union-of-spheres":
        count = int(p.pop("count", 4))
        if count < 1:
            raise InvalidParams("union-of-spheres needs count >= 1")
        m = union_of_spheres(seed, count, int(p.pop("resolution", 48)))
    else:
        raise InvalidParams(f"unknown shape kind {kind!r}")
    if p:
        raise InvalidParams(f"unknown parameters for {kind}: {sorted(p)}")
    return m


def prescale(mesh, diagonal=100.0):
    """Uniformly scale to the given bounding-box diagonal, centered at the origin."""
    lo, hi = mesh.bbox()
    s = diagonal / np.linalg.norm(hi - lo)
    return mesh.transformed(s, -(lo + hi) / 2.0 * s)
