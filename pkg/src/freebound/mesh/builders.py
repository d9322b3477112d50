"""Structured initial meshes: disks, graphs over the disk, annuli, sphere caps.

The disk triangulation has concentric rings: ring ``k`` (``k = 1..K``)
carries ``6k`` equally spaced vertices at radius ``k/K``, so the boundary
polygon has ``6K`` vertices.  Connectivity is that of the hexagonal
lattice, with the hexagonal rings bent onto circles.
"""

from __future__ import annotations

import numpy as np

from ..errors import GraphicalityViolation
from .trimesh import TriMesh


def _ring_strip(inner: np.ndarray, outer: np.ndarray, k: int) -> list:
    """Hexagonal-lattice triangles between ring ``k - 1`` and ring ``k``.

    Both rings are split into six sectors of ``k - 1`` and ``k`` vertices; in
    each sector outer and inner steps alternate, so every interior vertex
    has valence six.
    """
    m, M = len(inner), len(outer)
    tris = []
    for s in range(6):
        def inn(t):
            return inner[(s * (k - 1) + t) % m]

        def out(t):
            return outer[(s * k + t) % M]

        for t in range(k):
            tris.append((inn(t), out(t), out(t + 1)))
            if t < k - 1:
                tris.append((inn(t), out(t + 1), inn(t + 1)))
    return tris


def disk_layout(rings: int):
    """Planar unit-disk vertices ``(V, 2)`` and counter-clockwise triangles."""
    if rings < 1:
        raise ValueError("rings must be positive")
    pts = [(0.0, 0.0)]
    ids = [np.array([0])]
    for k in range(1, rings + 1):
        cnt = 6 * k
        ang = 2 * np.pi * np.arange(cnt) / cnt
        start = len(pts)
        r = k / rings
        pts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
        ids.append(np.arange(start, start + cnt))
    tris = [(0, ids[1][j], ids[1][(j + 1) % 6]) for j in range(6)]
    for k in range(2, rings + 1):
        tris.extend(_ring_strip(ids[k - 1], ids[k], k))
    return np.array(pts), np.array(tris, dtype=np.int64)


def flat_disk(resolution: int) -> TriMesh:
    """Equatorial unit disk with ``resolution`` rings."""
    P, T = disk_layout(resolution)
    X = np.column_stack([P, np.zeros(len(P))])
    return TriMesh(X, T)


def project_boundary(mesh: TriMesh) -> TriMesh:
    X = mesh.vertices.copy()
    b = mesh.boundary_mask
    X[b] /= np.linalg.norm(X[b], axis=1)[:, None]
    return mesh.with_vertices(X)


def graph_disk(resolution: int, height) -> TriMesh:
    """Graph of ``height(r, x, y)`` over the disk with its boundary on S^2.

    A boundary vertex at angle ``t`` sits at ``(rho cos t, rho sin t, z_b)``
    with ``z_b = height(1, cos t, sin t)`` and ``rho = sqrt(1 - z_b^2)``;
    interior vertices along the same ray are scaled by ``rho`` so rings never
    cross.  Raises :class:`GraphicalityViolation` unless every vertex normal
    has a positive ``e_3`` component.
    """
    P, T = disk_layout(resolution)
    x, y = P[:, 0], P[:, 1]
    r = np.hypot(x, y)
    z = np.broadcast_to(np.asarray(height(r, x, y), dtype=float), r.shape).copy()
    if not np.all(np.isfinite(z)):
        raise ValueError("height is not finite on the disk")
    theta = np.arctan2(y, x)
    zb = np.broadcast_to(np.asarray(height(np.ones_like(r), np.cos(theta), np.sin(theta)), dtype=float), r.shape)
    if np.any(np.abs(zb) >= 1):
        raise GraphicalityViolation("boundary height leaves the open interval (-1, 1)")
    rho = np.sqrt(1 - zb**2)
    mesh = TriMesh(np.column_stack([x * rho, y * rho, z]), T)
    b = mesh.boundary_mask
    X = mesh.vertices
    X[b, 2] = zb[b]
    mesh = project_boundary(mesh)
    s = mesh.vertex_normals()[:, 2]
    worst = int(np.argmin(s))
    if s[worst] <= 0:
        raise GraphicalityViolation(
            f"vertex normal e3-component {s[worst]:.3g} <= 0 at vertex {worst}", vertex=worst
        )
    return mesh


def annulus(resolution: int, waist: float, s_max: float, profile_rings: int | None = None) -> TriMesh:
    """Catenoidal annulus ``(waist cosh s cos t, waist cosh s sin t, waist s)``, ``|s| <= s_max``.

    ``resolution`` vertices per circle; the boundary circles are projected
    onto the unit sphere.  The default ring count keeps triangles near
    equilateral.
    """
    M = int(resolution)
    N = profile_rings or max(4, int(round(2 * s_max * M / (2 * np.pi))))
    s = np.linspace(-s_max, s_max, N + 1)
    rows = []
    for k, sk in enumerate(s):
        shift = 0.5 * (k % 2)  # stagger alternate rings
        t = 2 * np.pi * (np.arange(M) + shift) / M
        rho = waist * np.cosh(sk)
        rows.append(np.column_stack([rho * np.cos(t), rho * np.sin(t), np.full(M, waist * sk)]))
    X = np.concatenate(rows)
    tris = []
    for k in range(N):
        a, b = k * M, (k + 1) * M
        for j in range(M):
            j1 = (j + 1) % M
            if k % 2 == 0:  # upper ring shifted forward
                tris.append((a + j, a + j1, b + j))
                tris.append((a + j1, b + j1, b + j))
            else:  # lower ring shifted forward
                tris.append((a + j, b + j1, b + j))
                tris.append((a + j, a + j1, b + j1))
    mesh = TriMesh(X, np.array(tris, dtype=np.int64))
    if np.mean(np.einsum("ij,ij->i", mesh.vertex_normals(), mesh.vertices)) < 0:
        mesh = TriMesh(X, mesh.triangles[:, ::-1].copy())
    return project_boundary(mesh)


def catenoid_mesh(resolution: int, perturb: float = 0.0) -> TriMesh:
    """Mesh of the critical catenoid, optionally with the waist scaled by ``1 + perturb``."""
    from ..exact import critical_catenoid_parameters

    p = critical_catenoid_parameters()
    return annulus(resolution, p.c * (1 + perturb), p.s0)


def sphere_cap_mesh(resolution: int, polar_angle: float = np.pi / 3) -> TriMesh:
    """Cap of the unit sphere around the north pole, polar radius ``polar_angle``."""
    P, T = disk_layout(resolution)
    rho = np.hypot(P[:, 0], P[:, 1])
    phi = np.arctan2(P[:, 1], P[:, 0])
    a = rho * polar_angle
    X = np.column_stack([np.sin(a) * np.cos(phi), np.sin(a) * np.sin(phi), np.cos(a)])
    return TriMesh(X, T)
