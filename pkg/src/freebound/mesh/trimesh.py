"""Indexed triangle meshes with boundary bookkeeping and OBJ I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MeshQualityError

MIN_ANGLE_DEG = 1.0
MIN_AREA = 1e-12


@dataclass(eq=False)
class TriMesh:
    """Triangle mesh in R^3; triangles are consistently oriented index triples."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray = field(init=False, repr=False)
    _edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (V, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be (T, 3)")
        self._build_topology()

    # ------------------------------------------------------------ topology

    def _build_topology(self):
        T = self.triangles
        directed = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
        _, cnt_dir = np.unique(directed, axis=0, return_counts=True)
        if np.any(cnt_dir > 1):
            raise ValueError("inconsistent orientation: a directed edge is used twice")
        und = np.sort(directed, axis=1)
        edges, inv, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("non-manifold edge shared by more than two triangles")
        inv = np.asarray(inv).reshape(-1)
        self._edges = edges
        self._edge_counts = counts
        self._bdirected = directed[counts[inv] == 1]
        mask = np.zeros(len(self.vertices), dtype=bool)
        bedges = edges[counts == 1]
        mask[bedges.reshape(-1)] = True
        self.boundary_mask = mask
        # every boundary vertex must have exactly two boundary edges (closed loops)
        deg = np.bincount(bedges.reshape(-1), minlength=len(self.vertices))
        if np.any(deg[mask] != 2):
            raise ValueError("boundary edges do not form simple closed loops")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.nonzero(self.boundary_mask)[0]

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.nonzero(~self.boundary_mask)[0]

    def boundary_edges(self) -> np.ndarray:
        """Boundary edges oriented as in their triangle."""
        return self._bdirected

    def boundary_loops(self) -> list[np.ndarray]:
        nxt = {int(a): int(b) for a, b in self.boundary_edges()}
        loops, seen = [], set()
        for start in nxt:
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            v = nxt[start]
            while v != start:
                loop.append(v)
                seen.add(v)
                v = nxt[v]
            loops.append(np.array(loop))
        return loops

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self._edges) + len(self.triangles)

    # ------------------------------------------------------------ geometry

    def with_vertices(self, X) -> "TriMesh":
        m = object.__new__(TriMesh)
        m.vertices = np.ascontiguousarray(X, dtype=np.float64)
        m.triangles = self.triangles
        m.boundary_mask = self.boundary_mask
        m._edges = self._edges
        m._edge_counts = self._edge_counts
        m._bdirected = self._bdirected
        return m

    def copy(self) -> "TriMesh":
        return self.with_vertices(self.vertices.copy())

    def face_normals(self) -> np.ndarray:
        """Unnormalised face normals ``(b - a) x (c - a)`` (twice the area)."""
        X = self.vertices
        a, b, c = (X[self.triangles[:, k]] for k in range(3))
        return np.cross(b - a, c - a)

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(), axis=1)

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def boundary_length(self) -> float:
        be = self.boundary_edges()
        d = self.vertices[be[:, 1]] - self.vertices[be[:, 0]]
        return float(np.linalg.norm(d, axis=1).sum())

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted unit vertex normals."""
        N = self.face_normals()
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.triangles[:, k], N)
        return acc / np.linalg.norm(acc, axis=1)[:, None]

    def angles(self) -> np.ndarray:
        """Interior angles ``(T, 3)``; column k is the angle at corner k."""
        X = self.vertices
        out = np.empty(self.triangles.shape)
        for k in range(3):
            p = X[self.triangles[:, k]]
            q = X[self.triangles[:, (k + 1) % 3]]
            r = X[self.triangles[:, (k + 2) % 3]]
            u, v = q - p, r - p
            out[:, k] = np.arctan2(np.linalg.norm(np.cross(u, v), axis=1), np.einsum("ij,ij->i", u, v))
        return out

    def check_quality(self, min_angle_deg=MIN_ANGLE_DEG, min_area=MIN_AREA):
        amin = float(np.degrees(self.angles().min()))
        smin = float(self.triangle_areas().min())
        if amin <= min_angle_deg or smin <= min_area:
            raise MeshQualityError(f"degenerate triangle: min angle {amin:.3g} deg, min area {smin:.3g}")
        return amin, smin

    # ------------------------------------------------------------ I/O

    def to_obj(self, path) -> Path:
        path = Path(path)
        lines = ["# boundary vertices: " + " ".join(str(i + 1) for i in self.boundary_vertices)]
        lines += ["v {:.17g} {:.17g} {:.17g}".format(*x) for x in self.vertices]
        lines += ["f {} {} {}".format(*(t + 1)) for t in self.triangles]
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def from_obj(cls, path) -> "TriMesh":
        V, F = [], []
        for line in Path(path).read_text().splitlines():
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                V.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    F.append([idx[0] - 1, idx[k] - 1, idx[k + 1] - 1])
        return cls(np.array(V), np.array(F))
