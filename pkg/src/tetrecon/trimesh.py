"""Indexed triangle mesh container and intrinsic measures."""

from dataclasses import dataclass

import numpy as np


@dataclass
class TriMesh:
    vertices: np.ndarray    # (n, 3) float64
    faces: np.ndarray       # (m, 3) int64, counter-clockwise seen from outside

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)

    @property
    def n_faces(self):
        return len(self.faces)

    def triangles(self):
        return self.vertices[self.faces]

    def signed_volume(self):
        T = self.triangles()
        return float(np.einsum("ij,ij->i", T[:, 0], np.cross(T[:, 1], T[:, 2])).sum() / 6.0)

    def areas(self):
        T = self.triangles()
        return 0.5 * np.linalg.norm(np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]), axis=1)

    def edges(self):
        """Unique undirected edges (sorted pairs) and the number of faces on each."""
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def euler_characteristic(self):
        used = np.unique(self.faces)
        e, _ = self.edges()
        return len(used) - len(e) + len(self.faces)

    def bbox(self):
        return self.vertices.min(0), self.vertices.max(0)

    def transformed(self, scale, offset):
        return TriMesh(self.vertices * scale + offset, self.faces.copy())
