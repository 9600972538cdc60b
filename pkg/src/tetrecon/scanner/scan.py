"""Synthetic range scanner with range noise and outliers."""

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from numba import njit

from ..trimesh import TriMesh
from .shapes import prescale

SCENE_DIAGONAL = 100.0


class EmptyScan(RuntimeError):
    """No scanner ray hit the shape."""


@dataclass(frozen=True)
class ScanConfig:
    resolution_x: int = 100
    resolution_y: int = 100
    scanner_positions: int = 10
    min_range: float = 70.0
    max_range: float = 300.0
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.resolution_x < 1 or self.resolution_y < 1:
            raise ValueError("resolutions must be >= 1")
        if self.scanner_positions < 1:
            raise ValueError("scanner_positions must be >= 1")
        if not (0 < self.min_range < self.max_range):
            raise ValueError("need 0 < min_range < max_range")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not (0.0 <= self.outlier_fraction <= 1.0):
            raise ValueError("outlier_fraction must lie in [0, 1]")

    def to_dict(self):
        return asdict(self)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


PRESETS = {
    "LR": dict(resolution_x=50, resolution_y=50, scanner_positions=5),
    "HR": dict(resolution_x=100, resolution_y=100, scanner_positions=10),
    "HRN": dict(resolution_x=100, resolution_y=100, scanner_positions=10, noise_sigma=0.5),
    "HRO": dict(resolution_x=100, resolution_y=100, scanner_positions=10, outlier_fraction=0.001),
    "HRNO": dict(resolution_x=100, resolution_y=100, scanner_positions=10, noise_sigma=0.5,
                 outlier_fraction=0.001),
}


def preset(name, seed=0):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ScanConfig(min_range=70.0, max_range=300.0, seed=seed, **PRESETS[name])


@dataclass
class Scan:
    points: np.ndarray          # (n, 3)
    camera_index: np.ndarray    # (n,) index into cameras
    cameras: np.ndarray         # (c, 3)
    mesh: TriMesh               # the prescaled shape that was scanned
    n_outliers: int = 0

    def sighting_cameras(self):
        return self.cameras[self.camera_index]


def fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                     [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                     [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])


def camera_positions(config, center):
    """Directions on a rotated Fibonacci sphere; one range drawn per stratum of [min, max]."""
    rng = np.random.default_rng([config.seed, 0])
    n = config.scanner_positions
    dirs = fibonacci_sphere(n) @ random_rotation(rng).T
    strata = (np.arange(n) + rng.random(n)) / n
    ranges = config.min_range + (config.max_range - config.min_range) * rng.permutation(strata)
    return center + dirs * ranges[:, None]


def camera_frame(cam, target):
    f = target - cam
    f /= np.linalg.norm(f)
    up = np.array([0.0, 0.0, 1.0]) if abs(f[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    r = np.cross(f, up)
    r /= np.linalg.norm(r)
    u = np.cross(r, f)
    return f, r, u


@njit(cache=True)
def _render(tris, cam, f, r, u, tan_x, tan_y, nx, ny):
    """First-hit distances along each pixel ray (inf where nothing is hit)."""
    m = tris.shape[0]
    # image-plane bounding boxes of projected triangles
    px0 = np.empty(m, dtype=np.int64)
    px1 = np.empty(m, dtype=np.int64)
    py0 = np.empty(m, dtype=np.int64)
    py1 = np.empty(m, dtype=np.int64)
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    for t in range(m):
        lox = 1e300
        hix = -1e300
        loy = 1e300
        hiy = -1e300
        front = True
        for k in range(3):
            dx = tris[t, k, 0] - cam[0]
            dy = tris[t, k, 1] - cam[1]
            dz = tris[t, k, 2] - cam[2]
            z = dx * f[0] + dy * f[1] + dz * f[2]
            if z <= 0.0:
                front = False
                break
            sx = (dx * r[0] + dy * r[1] + dz * r[2]) / z
            sy = (dx * u[0] + dy * u[1] + dz * u[2]) / z
            lox = min(lox, sx)
            hix = max(hix, sx)
            loy = min(loy, sy)
            hiy = max(hiy, sy)
        if not front:
            px0[t] = 0
            px1[t] = nx - 1
            py0[t] = 0
            py1[t] = ny - 1
        else:
            # pixel i covers sx in [(2i/nx - 1) tan_x, (2(i+1)/nx - 1) tan_x]
            px0[t] = max(0, int(math.floor((lox / tan_x + 1.0) * 0.5 * nx)) - 1)
            px1[t] = min(nx - 1, int(math.floor((hix / tan_x + 1.0) * 0.5 * nx)) + 1)
            py0[t] = max(0, int(math.floor((loy / tan_y + 1.0) * 0.5 * ny)) - 1)
            py1[t] = min(ny - 1, int(math.floor((hiy / tan_y + 1.0) * 0.5 * ny)) + 1)
        for i in range(px0[t], px1[t] + 1):
            for j in range(py0[t], py1[t] + 1):
                counts[i * ny + j + 1] += 1
    for k in range(nx * ny):
        counts[k + 1] += counts[k]
    fill = counts[:-1].copy()
    items = np.empty(counts[-1], dtype=np.int64)
    for t in range(m):
        for i in range(px0[t], px1[t] + 1):
            for j in range(py0[t], py1[t] + 1):
                items[fill[i * ny + j]] = t
                fill[i * ny + j] += 1
    depth = np.full((nx, ny), np.inf)
    dirs = np.empty((nx, ny, 3))
    for i in range(nx):
        sx = (2.0 * (i + 0.5) / nx - 1.0) * tan_x
        for j in range(ny):
            sy = (2.0 * (j + 0.5) / ny - 1.0) * tan_y
            d0 = f[0] + sx * r[0] + sy * u[0]
            d1 = f[1] + sx * r[1] + sy * u[1]
            d2 = f[2] + sx * r[2] + sy * u[2]
            nrm = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            d0 /= nrm
            d1 /= nrm
            d2 /= nrm
            dirs[i, j, 0] = d0
            dirs[i, j, 1] = d1
            dirs[i, j, 2] = d2
            best = np.inf
            for q in range(counts[i * ny + j], counts[i * ny + j + 1]):
                t = items[q]
                # Moller-Trumbore
                e1x = tris[t, 1, 0] - tris[t, 0, 0]
                e1y = tris[t, 1, 1] - tris[t, 0, 1]
                e1z = tris[t, 1, 2] - tris[t, 0, 2]
                e2x = tris[t, 2, 0] - tris[t, 0, 0]
                e2y = tris[t, 2, 1] - tris[t, 0, 1]
                e2z = tris[t, 2, 2] - tris[t, 0, 2]
                px = d1 * e2z - d2 * e2y
                py = d2 * e2x - d0 * e2z
                pz = d0 * e2y - d1 * e2x
                det = e1x * px + e1y * py + e1z * pz
                if det == 0.0:
                    continue
                inv = 1.0 / det
                tx = cam[0] - tris[t, 0, 0]
                ty = cam[1] - tris[t, 0, 1]
                tz = cam[2] - tris[t, 0, 2]
                a = (tx * px + ty * py + tz * pz) * inv
                if a < 0.0 or a > 1.0:
                    continue
                qx = ty * e1z - tz * e1y
                qy = tz * e1x - tx * e1z
                qz = tx * e1y - ty * e1x
                b = (d0 * qx + d1 * qy + d2 * qz) * inv
                if b < 0.0 or a + b > 1.0:
                    continue
                dist = (e2x * qx + e2y * qy + e2z * qz) * inv
                if 0.0 < dist < best:
                    best = dist
            depth[i, j] = best
    return depth, dirs


def scan(mesh, config, prescaled=False):
    """Range-scan ``mesh`` (prescaled to a 100-unit bounding-box diagonal unless ``prescaled``)."""
    if not prescaled:
        mesh = prescale(mesh, SCENE_DIAGONAL)
    lo, hi = mesh.bbox()
    center = (lo + hi) / 2.0
    radius = float(np.linalg.norm(mesh.vertices - center, axis=1).max())
    cams = camera_positions(config, center)
    fov_y = 2.0 * math.atan(radius / config.min_range) * 1.1
    tan_y = math.tan(fov_y / 2.0)
    tan_x = tan_y * config.resolution_x / config.resolution_y
    tris = mesh.triangles()
    pts, idx = [], []
    for k, cam in enumerate(cams):
        f, r, u = camera_frame(cam, center)
        depth, dirs = _render(tris, cam, f, r, u, tan_x, tan_y,
                              config.resolution_x, config.resolution_y)
        hit = np.isfinite(depth)
        d = depth[hit]
        v = dirs[hit]
        if config.noise_sigma > 0:
            rng = np.random.default_rng([config.seed, 1, k])
            d = d + rng.normal(0.0, config.noise_sigma, len(d))
        pts.append(cam + v * d[:, None])
        idx.append(np.full(len(d), k, dtype=np.int64))
    points = np.concatenate(pts)
    cam_index = np.concatenate(idx)
    if len(points) == 0:
        raise EmptyScan("no scanner ray hit the shape")
    points, cam_index, n_out = add_outliers(points, cam_index, cams, config.outlier_fraction,
                                            seed=config.seed)
    return Scan(points, cam_index, cams, mesh, n_out)


def n_outliers_for(fraction, n):
    return int(math.ceil(round(fraction * n, 9)))


def add_outliers(points, camera_index, cameras, fraction, seed=0):
    """Append ceil(fraction * N) points uniform in the points' bounding box, each with a random camera."""
    if not (0.0 <= fraction <= 1.0):
        raise ValueError("fraction must lie in [0, 1]")
    k = n_outliers_for(fraction, len(points))
    if k == 0:
        return points, camera_index, 0
    rng = np.random.default_rng([seed, 2])
    lo, hi = points.min(0), points.max(0)
    extra = lo + rng.random((k, 3)) * (hi - lo)
    cams = rng.integers(0, len(cameras), k)
    return (np.concatenate([points, extra]), np.concatenate([camera_index, cams]), k)
