"""Discrete curvature on triangle meshes.

Mean curvature uses the cotangent formula with mixed Voronoi areas;
``|A|^2`` uses a quadric fitted over each vertex's 2-ring.  The scalar
mean curvature follows the smooth convention (sum of principal
curvatures, unit sphere with outward normal has ``H = 2``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import InsufficientNeighborhoodError, MeshQualityError
from .trimesh import TriMesh


def cotangents(mesh: TriMesh) -> np.ndarray:
    """``cot`` of the angle at each corner, ``(T, 3)``."""
    X = mesh.vertices
    T = mesh.triangles
    out = np.empty(T.shape)
    for k in range(3):
        p, q, r = X[T[:, k]], X[T[:, (k + 1) % 3]], X[T[:, (k + 2) % 3]]
        u, v = q - p, r - p
        cr = np.linalg.norm(np.cross(u, v), axis=1)
        if np.any(cr <= 0):
            raise MeshQualityError("degenerate triangle in cotangent weights")
        out[:, k] = np.einsum("ij,ij->i", u, v) / cr
    return out


def cotan_laplacian(mesh: TriMesh) -> sp.csr_matrix:
    """Positive semi-definite stiffness ``L`` with ``x^T L x = sum w_ij |x_i - x_j|^2 / ...``.

    ``L_ij = -(cot a_ij + cot b_ij)/2`` off the diagonal, rows sum to zero.
    """
    T = mesh.triangles
    C = cotangents(mesh)
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j = T[:, (k + 1) % 3], T[:, (k + 2) % 3]  # edge opposite corner k
        w = 0.5 * C[:, k]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return L


def area_gradient(mesh: TriMesh) -> np.ndarray:
    """Exact gradient of the total area with respect to vertex positions, ``(V, 3)``.

    For a triangle with unit normal ``n`` the gradient at corner ``p`` is
    ``n x (r - q) / 2`` where ``q, r`` follow ``p`` in orientation order.
    """
    X = mesh.vertices
    T = mesh.triangles
    N = mesh.face_normals()
    N = N / np.linalg.norm(N, axis=1)[:, None]
    G = np.zeros_like(X)
    for k in range(3):
        q, r = X[T[:, (k + 1) % 3]], X[T[:, (k + 2) % 3]]
        np.add.at(G, T[:, k], 0.5 * np.cross(N, r - q))
    return G


def mixed_areas(mesh: TriMesh) -> np.ndarray:
    """Mixed Voronoi vertex areas with the barycentric fallback for obtuse triangles."""
    X = mesh.vertices
    T = mesh.triangles
    C = cotangents(mesh)
    areas = mesh.triangle_areas()
    A = np.zeros(mesh.n_vertices)
    obtuse = C < 0  # cot < 0 means the angle exceeds pi/2
    any_obtuse = obtuse.any(axis=1)
    for k in range(3):
        p, q, r = T[:, k], T[:, (k + 1) % 3], T[:, (k + 2) % 3]
        # Voronoi part: edges pq and pr weighted by the cotangents of the opposite angles
        lpq = np.sum((X[q] - X[p]) ** 2, axis=1)
        lpr = np.sum((X[r] - X[p]) ** 2, axis=1)
        vor = (lpr * C[:, (k + 1) % 3] + lpq * C[:, (k + 2) % 3]) / 8
        contrib = np.where(any_obtuse, np.where(obtuse[:, k], areas / 2, areas / 4), vor)
        np.add.at(A, p, contrib)
    return A


def sphere_tangent_projection(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Remove the radial component of ``G`` at points ``X``."""
    u = X / np.linalg.norm(X, axis=1)[:, None]
    return G - np.einsum("ij,ij->i", G, u)[:, None] * u


@dataclass
class DiscreteMeanCurvature:
    vector: np.ndarray  # (V, 3) mean curvature vector, H * normal
    scalar: np.ndarray  # (V,) <vector, vertex normal>
    areas: np.ndarray
    normals: np.ndarray


def discrete_mean_curvature(mesh: TriMesh) -> DiscreteMeanCurvature:
    """Cotangent mean curvature vector ``grad(area)_i / A_i``.

    Boundary vertices keep only the component tangent to the unit sphere.
    """
    G = area_gradient(mesh)
    b = mesh.boundary_mask
    if b.any():
        G[b] = sphere_tangent_projection(mesh.vertices[b], G[b])
    A = mixed_areas(mesh)
    vec = G / A[:, None]
    nrm = mesh.vertex_normals()
    return DiscreteMeanCurvature(vec, np.einsum("ij,ij->i", vec, nrm), A, nrm)


# ---------------------------------------------------------------- |A|^2


def _adjacency(mesh: TriMesh) -> sp.csr_matrix:
    e = mesh.edges
    n = mesh.n_vertices
    data = np.ones(2 * len(e))
    return sp.csr_matrix((data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))


@dataclass
class DiscreteA2:
    values: np.ndarray  # NaN where the fit is unavailable
    excluded: np.ndarray  # vertex indices without a usable 2-ring

    def stats(self, mask=None) -> np.ndarray:
        v = self.values if mask is None else self.values[mask]
        return v[np.isfinite(v)]


def tangent_frames(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.where(np.abs(normals[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = np.cross(normals, helper)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(normals, e1)
    return e1, e2


@dataclass
class QuadricFit:
    """Per-vertex fit ``c = A a^2 + B ab + C b^2 + D a + E b`` in the frame ``(e1, e2, n)``."""

    coef: np.ndarray  # (V, 5), NaN where unavailable
    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray  # area-weighted vertex normals defining the frames
    ok: np.ndarray

    def fitted_normals(self) -> np.ndarray:
        """Unit normal of the fitted graph at each vertex (frame normal where the fit failed)."""
        D, E = self.coef[:, 3], self.coef[:, 4]
        n = self.normal - D[:, None] * self.e1 - E[:, None] * self.e2
        n = n / np.linalg.norm(n, axis=1)[:, None]
        return np.where(self.ok[:, None], n, self.normal)


def quadric_fit(mesh: TriMesh, min_neighbors: int = 6) -> QuadricFit:
    """Least-squares quadric over each vertex's 2-ring.

    Vertices with fewer than ``min_neighbors`` neighbours or an
    ill-conditioned system are flagged in ``ok``.
    """
    X = mesh.vertices
    nrm = mesh.vertex_normals()
    e1, e2 = tangent_frames(nrm)
    Adj = _adjacency(mesh)
    two = ((Adj + Adj @ Adj) > 0).tocoo()
    keep = two.row != two.col
    i, j = two.row[keep], two.col[keep]
    d = X[j] - X[i]
    a = np.einsum("ij,ij->i", d, e1[i])
    b = np.einsum("ij,ij->i", d, e2[i])
    c = np.einsum("ij,ij->i", d, nrm[i])
    Phi = np.column_stack([a * a, a * b, b * b, a, b])
    # normalise columns per vertex scale for conditioning
    scale = np.zeros(mesh.n_vertices)
    np.maximum.at(scale, i, np.hypot(a, b))
    s = scale[i]
    Phi_s = Phi / np.column_stack([s * s, s * s, s * s, s, s])
    M = np.zeros((mesh.n_vertices, 5, 5))
    rhs = np.zeros((mesh.n_vertices, 5))
    np.add.at(M, i, Phi_s[:, :, None] * Phi_s[:, None, :])
    np.add.at(rhs, i, Phi_s * c[:, None])
    count = np.bincount(i, minlength=mesh.n_vertices)
    cond_ok = np.zeros(mesh.n_vertices, dtype=bool)
    ok = count >= min_neighbors
    if ok.any():
        cond_ok[ok] = np.linalg.cond(M[ok]) < 1e10
    ok &= cond_ok
    coef = np.full((mesh.n_vertices, 5), np.nan)
    if ok.any():
        coef[ok] = np.linalg.solve(M[ok], rhs[ok][:, :, None])[:, :, 0]
    sc = np.column_stack([scale**2, scale**2, scale**2, scale, scale])
    return QuadricFit(coef / sc, e1, e2, nrm, ok)


def discrete_A2(mesh: TriMesh, strict: bool = False, min_neighbors: int = 6) -> DiscreteA2:
    """Per-vertex ``|A|^2 = k1^2 + k2^2`` from a quadric fit over the 2-ring.

    The shape operator is ``I^{-1} II`` of the fitted graph (see
    :func:`quadric_fit`) at the origin.  Vertices with fewer than
    ``min_neighbors`` 2-ring neighbours or a singular fit are excluded
    (reported, NaN) or raise when ``strict``.
    """
    fit = quadric_fit(mesh, min_neighbors)
    A_, B_, C_, D_, E_ = fit.coef.T
    w = np.sqrt(1 + D_**2 + E_**2)
    I11, I12, I22 = 1 + D_**2, D_ * E_, 1 + E_**2
    II11, II12, II22 = 2 * A_ / w, B_ / w, 2 * C_ / w
    det = I11 * I22 - I12**2
    # S = I^{-1} II
    S11 = (I22 * II11 - I12 * II12) / det
    S12 = (I22 * II12 - I12 * II22) / det
    S21 = (-I12 * II11 + I11 * II12) / det
    S22 = (-I12 * II12 + I11 * II22) / det
    vals = S11**2 + S22**2 + 2 * S12 * S21
    excluded = np.nonzero(~fit.ok)[0]
    if strict and len(excluded):
        raise InsufficientNeighborhoodError(f"{len(excluded)} vertex(es) without a usable 2-ring, first {excluded[0]}")
    return DiscreteA2(vals, excluded)


# ---------------------------------------------------------------- observables


def discrete_isoperimetric_residual(mesh: TriMesh) -> float:
    """``|2 area - boundary length| / boundary length``."""
    L = mesh.boundary_length()
    return abs(2 * mesh.area() - L) / L


def boundary_normals(mesh: TriMesh, rings: int = 3) -> np.ndarray:
    """Surface normals at boundary vertices from a cubic fit over the ``rings``-ring, ``(V_b, 3)``.

    One-sided vertex normals are only first-order accurate at the boundary;
    the cubic graph fit is third order.  Falls back to the vertex normal when
    the neighbourhood is too small for the fit.
    """
    X = mesh.vertices
    nrm = mesh.vertex_normals()
    e1, e2 = tangent_frames(nrm)
    step = _adjacency(mesh) + sp.identity(mesh.n_vertices, format="csr")
    bv = mesh.boundary_vertices
    R = sp.csr_matrix((np.ones(len(bv)), (np.arange(len(bv)), bv)), shape=(len(bv), mesh.n_vertices))
    for _ in range(rings):
        R = R @ step
    R = R.tocsr()
    out = nrm[bv].copy()
    for k, i in enumerate(bv):
        j = R[k].indices
        j = j[j != i]
        if len(j) < 12:
            continue
        d = X[j] - X[i]
        a, b, c = d @ e1[i], d @ e2[i], d @ nrm[i]
        s = np.hypot(a, b).max()
        a, b, c = a / s, b / s, c / s
        Phi = np.column_stack([a, b, a * a, a * b, b * b, a**3, a * a * b, a * b * b, b**3])
        coef = np.linalg.lstsq(Phi, c, rcond=None)[0]
        n = nrm[i] - coef[0] * e1[i] - coef[1] * e2[i]
        out[k] = n / np.linalg.norm(n)
    return out


def boundary_orthogonality(mesh: TriMesh, fitted: bool = True) -> float:
    """``max |<nu^M, x/|x|>|`` over boundary vertices.

    ``nu^M`` comes from :func:`boundary_normals`, or from the one-sided
    area-weighted vertex normals when ``fitted`` is false.
    """
    b = mesh.boundary_mask
    if not b.any():
        return 0.0
    X = mesh.vertices[b]
    n = boundary_normals(mesh) if fitted else mesh.vertex_normals()[b]
    return float(np.max(np.abs(np.einsum("ij,ij->i", n, X) / np.linalg.norm(X, axis=1))))


@dataclass
class FlatnessMetrics:
    plane_deviation: float
    plane_normal: np.ndarray
    max_A2: float
    min_s_e3: float
    excluded_vertices: int

    def to_dict(self) -> dict:
        return {
            "plane_deviation": self.plane_deviation,
            "plane_normal": [float(x) for x in self.plane_normal],
            "max_A2": self.max_A2,
            "min_s_e3": self.min_s_e3,
            "excluded_vertices": self.excluded_vertices,
        }


def flatness_metrics(mesh: TriMesh) -> FlatnessMetrics:
    """Deviation from the best-fit plane through the origin, ``sup |A|^2``, ``min <n, e3>``."""
    X = mesh.vertices
    w, V = np.linalg.eigh(X.T @ X)
    normal = V[:, 0]
    if normal[2] < 0:
        normal = -normal
    dev = float(np.max(np.abs(X @ normal)))
    a2 = discrete_A2(mesh)
    vals = a2.stats()
    s = mesh.vertex_normals()[:, 2]
    return FlatnessMetrics(dev, normal, float(vals.max()) if vals.size else float("nan"), float(s.min()), len(a2.excluded))
