"""Free-boundary area minimisation by projected gradient descent.

Interior vertices move in R^3; boundary vertices move in the tangent plane
of the unit sphere and are then renormalised to ``|x| = 1``.  The descent
direction is the area gradient, optionally preconditioned by an H^1-type
metric (cotangent stiffness plus lumped interior and boundary mass) which
makes the iteration count nearly independent of the resolution.  Step
lengths use Armijo backtracking on the total area.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import MeshQualityError, NonConvergenceError
from .discrete import area_gradient, boundary_orthogonality, cotan_laplacian, sphere_tangent_projection
from .trimesh import TriMesh


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 500
    grad_tol: float = 1e-8
    disp_tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    min_step: float = 1e-12
    metric: str = "h1"  # "h1" or "euclidean"
    projection: str = "tangent-then-normalize"
    boundary_motion: str = "normal"  # "normal" (across the boundary curve) or "tangent" (full sphere tangent plane)
    interior_motion: str = "full"  # "full" (R^3) or "normal" (along vertex normals)
    mass_weight: float = 1.0
    relax_sweeps: int = 10

    def __post_init__(self):
        for name in ("max_iter", "grad_tol", "disp_tol", "armijo_c", "initial_step", "min_step", "mass_weight"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.metric not in ("h1", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.boundary_motion not in ("normal", "tangent"):
            raise ValueError(f"unknown boundary motion {self.boundary_motion!r}")
        if self.interior_motion not in ("full", "normal"):
            raise ValueError(f"unknown interior motion {self.interior_motion!r}")
        if self.projection != "tangent-then-normalize":
            raise ValueError(f"unknown projection {self.projection!r}")


@dataclass
class TraceRow:
    iteration: int
    area: float
    max_grad: float
    boundary_orthogonality: float
    step: float
    max_displacement: float


@dataclass
class SolveResult:
    mesh: TriMesh
    trace: list
    converged: bool
    reason: str
    retries: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.trace[-1].iteration if self.trace else 0


def boundary_conormals(mesh: TriMesh) -> np.ndarray:
    """Unit vectors ``(V_b, 3)`` tangent to the sphere and orthogonal to the boundary polygon.

    Rows follow ``mesh.boundary_vertices``.
    """
    be = mesh.boundary_edges()
    nxt = np.empty(mesh.n_vertices, dtype=np.int64)
    prv = np.empty(mesh.n_vertices, dtype=np.int64)
    nxt[be[:, 0]] = be[:, 1]
    prv[be[:, 1]] = be[:, 0]
    bv = mesh.boundary_vertices
    X = mesh.vertices
    tau = X[nxt[bv]] - X[prv[bv]]
    u = X[bv] / np.linalg.norm(X[bv], axis=1)[:, None]
    c = np.cross(tau, u)
    return c / np.linalg.norm(c, axis=1)[:, None]


def constrained_gradient(mesh: TriMesh, boundary_motion: str = "normal", interior_motion: str = "full") -> np.ndarray:
    """Area gradient restricted to the admissible boundary motions.

    ``tangent``: radial part removed at boundary vertices.  ``normal``: only
    the component across the boundary curve within the sphere is kept.
    """
    G = area_gradient(mesh)
    b = mesh.boundary_mask
    if interior_motion == "normal":
        N = mesh.vertex_normals()[~b]
        G[~b] = np.einsum("ij,ij->i", G[~b], N)[:, None] * N
    if b.any():
        if boundary_motion == "tangent":
            G[b] = sphere_tangent_projection(mesh.vertices[b], G[b])
        else:
            c = boundary_conormals(mesh)
            G[b] = np.einsum("ij,ij->i", G[b], c)[:, None] * c
    return G


def _tangent_basis(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = X / np.linalg.norm(X, axis=1)[:, None]
    helper = np.where(np.abs(u[:, [2]]) < 0.9, np.array([[0, 0, 1.0]]), np.array([[1.0, 0, 0]]))
    t1 = np.cross(u, helper)
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(u, t1)
    return t1, t2


def _reduction(mesh: TriMesh, boundary_motion: str = "normal", interior_motion: str = "full") -> sp.csr_matrix:
    """Matrix ``T`` (3V x dof) mapping reduced coordinates to vertex displacements."""
    V = mesh.n_vertices
    b = mesh.boundary_mask
    rows, cols, vals = [], [], []
    dof = 0
    interior = np.nonzero(~b)[0]
    if interior_motion == "normal":
        N = mesh.vertex_normals()[interior]
        for k in range(3):
            rows.append(3 * interior + k)
            cols.append(dof + np.arange(len(interior)))
            vals.append(N[:, k])
        dof += len(interior)
    else:
        for k in range(3):
            rows.append(3 * interior + k)
            cols.append(dof + 3 * np.arange(len(interior)) + k)
            vals.append(np.ones(len(interior)))
        dof += 3 * len(interior)
    bnd = np.nonzero(b)[0]
    if len(bnd):
        basis = _tangent_basis(mesh.vertices[bnd]) if boundary_motion == "tangent" else (boundary_conormals(mesh),)
        q_n = len(basis)
        for q, t in enumerate(basis):
            for k in range(3):
                rows.append(3 * bnd + k)
                cols.append(dof + q_n * np.arange(len(bnd)) + q)
                vals.append(t[:, k])
        dof += q_n * len(bnd)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(3 * V, dof))


def _metric(mesh: TriMesh, weight: float) -> sp.csr_matrix:
    """Scalar H^1 metric: cotangent stiffness + lumped vertex mass + boundary edge mass."""
    L = cotan_laplacian(mesh)
    A = mesh.triangle_areas()
    mass = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(mass, mesh.triangles[:, k], A / 3)
    be = mesh.boundary_edges()
    if len(be):
        lens = np.linalg.norm(mesh.vertices[be[:, 1]] - mesh.vertices[be[:, 0]], axis=1)
        np.add.at(mass, be[:, 0], lens / 2)
        np.add.at(mass, be[:, 1], lens / 2)
    return (L + weight * sp.diags(mass)).tocsr()


def descent_direction(mesh: TriMesh, G: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Displacement field ``(V, 3)`` tangent to the constraint, with ``<G, d> < 0``."""
    if config.metric == "euclidean":
        return -G
    T = _reduction(mesh, config.boundary_motion, config.interior_motion)
    S = sp.kron(_metric(mesh, config.mass_weight), sp.eye(3), format="csr")
    K = (T.T @ S @ T).tocsc()
    y = spla.spsolve(K, -(T.T @ G.reshape(-1)))
    return (T @ y).reshape(-1, 3)


def apply_step(mesh: TriMesh, d: np.ndarray, t: float) -> TriMesh:
    """Tangential step, then radial normalisation of the boundary vertices."""
    X = mesh.vertices + t * d
    b = mesh.boundary_mask
    X[b] /= np.linalg.norm(X[b], axis=1)[:, None]
    return mesh.with_vertices(X)


def relax_tangentially(mesh: TriMesh, sweeps: int = 10, weight: float = 0.5) -> TriMesh:
    """Move interior vertices toward their neighbour average within their tangent plane."""
    n = mesh.n_vertices
    e = mesh.edges
    A = sp.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
    deg = np.asarray(A.sum(axis=1)).ravel()
    interior = ~mesh.boundary_mask
    for _ in range(sweeps):
        X = mesh.vertices
        N = mesh.vertex_normals()
        delta = (A @ X) / deg[:, None] - X
        delta -= np.einsum("ij,ij->i", delta, N)[:, None] * N
        Y = X.copy()
        Y[interior] += weight * delta[interior]
        mesh = mesh.with_vertices(Y)
    return mesh


def minimize(mesh: TriMesh, config: SolverConfig | None = None, raise_on_failure: bool = True, monitor=None) -> SolveResult:
    """Minimise area with boundary vertices on the unit sphere.

    Stops when the largest constrained gradient entry or the largest vertex
    displacement of an accepted step falls below the configured thresholds.
    A degenerate triangle triggers one tangential relaxation and a restart
    of the line search; a second one raises :class:`MeshQualityError`.

    ``monitor(iteration, mesh)`` may return a non-empty string to stop early;
    the result is then unconverged with that string as the reason.
    """
    config = config or SolverConfig()
    b = mesh.boundary_mask
    X = mesh.vertices.copy()
    X[b] /= np.linalg.norm(X[b], axis=1)[:, None]
    mesh = mesh.with_vertices(X)
    mesh.check_quality()
    trace = []
    retries = 0
    area = mesh.area()
    G = constrained_gradient(mesh, config.boundary_motion, config.interior_motion)
    gmax = float(np.abs(G).max())
    trace.append(TraceRow(0, area, gmax, boundary_orthogonality(mesh), 0.0, 0.0))
    if gmax < config.grad_tol:
        return SolveResult(mesh, trace, True, "gradient", retries)
    for it in range(1, config.max_iter + 1):
        d = descent_direction(mesh, G, config)
        slope = float(np.sum(G * d))
        if slope >= 0:
            d, slope = -G, -float(np.sum(G * G))
        t = config.initial_step
        while True:
            trial = apply_step(mesh, d, t)
            new_area = trial.area()
            if new_area <= area + config.armijo_c * t * slope:
                break
            t *= config.backtrack
            if t < config.min_step:
                trial = None
                break
        if trial is None:
            reason = "line search stalled"
            if gmax < 1e3 * config.grad_tol:
                return SolveResult(mesh, trace, True, "stalled at roundoff", retries)
            return _fail(mesh, trace, reason, retries, raise_on_failure)
        disp = float(np.max(np.linalg.norm(trial.vertices - mesh.vertices, axis=1)))
        try:
            trial.check_quality()
        except MeshQualityError as exc:
            if retries:
                return _fail(mesh, trace, f"mesh quality: {exc}", retries, raise_on_failure, MeshQualityError)
            retries += 1
            trial = relax_tangentially(trial, config.relax_sweeps)
            try:
                trial.check_quality()
            except MeshQualityError as exc2:
                return _fail(mesh, trace, f"mesh quality: {exc2}", retries, raise_on_failure, MeshQualityError)
            new_area = trial.area()
        if new_area > area:
            raise AssertionError("area increased across an accepted step")
        mesh, area = trial, new_area
        G = constrained_gradient(mesh, config.boundary_motion, config.interior_motion)
        gmax = float(np.abs(G).max())
        trace.append(TraceRow(it, area, gmax, boundary_orthogonality(mesh), t, disp))
        if gmax < config.grad_tol:
            return SolveResult(mesh, trace, True, "gradient", retries)
        if disp < config.disp_tol:
            return SolveResult(mesh, trace, True, "displacement", retries)
        if monitor is not None:
            stop = monitor(it, mesh)
            if stop:
                return SolveResult(mesh, trace, False, str(stop), retries)
    return _fail(mesh, trace, f"no convergence after {config.max_iter} iterations", retries, raise_on_failure)


def _fail(mesh, trace, reason, retries, raise_on_failure, error=NonConvergenceError):
    res = SolveResult(mesh, trace, False, reason, retries)
    if raise_on_failure:
        err = error(reason, trace=trace) if error is NonConvergenceError else error(reason)
        err.result = res
        raise err
    return res


def write_trace_csv(trace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "area", "max_grad", "boundary_orthogonality", "step", "max_displacement"])
        for r in trace:
            w.writerow([r.iteration] + [f"{v:.17g}" for v in (r.area, r.max_grad, r.boundary_orthogonality, r.step, r.max_displacement)])
    return path


def waist_radius(mesh: TriMesh) -> float:
    return float(np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1]).min())


def find_critical_annulus(
    resolution: int,
    config: SolverConfig | None = None,
    bracket: tuple = (-0.05, 0.05),
    escape: float = 0.1,
    max_bisections: int = 60,
    raise_on_failure: bool = True,
) -> SolveResult:
    """Discrete critical annulus near the critical catenoid.

    The catenoid is an unstable critical point, so plain descent from a
    sampled catenoid leaves it along the rotationally symmetric mode: the
    waist either opens or pinches.  The escape direction changes sign with
    the initial waist scale ``1 + eps``, so ``eps`` is bisected until a
    descent run reaches the stopping tolerance before the waist has moved
    by the relative amount ``escape``.  Interior vertices default to
    normal motion, which removes the slow tangential modes that otherwise
    let the unstable mode outgrow the stable ones.
    """
    from .builders import catenoid_mesh

    config = config or SolverConfig(interior_motion="normal")

    def run(eps):
        mesh = catenoid_mesh(resolution, eps)
        w0 = waist_radius(mesh)

        def monitor(it, m):
            w = waist_radius(m) / w0
            if w > 1 + escape:
                return "opens"
            if w < 1 - escape:
                return "pinches"
            return None

        return minimize(mesh, config, raise_on_failure=False, monitor=monitor)

    lo, hi = bracket
    r_lo, r_hi = run(lo), run(hi)
    for r in (r_lo, r_hi):
        if r.converged:
            r.meta.update(waist_scale=1 + (lo if r is r_lo else hi), bisections=0)
            return r
    if not (r_lo.reason == "pinches" and r_hi.reason == "opens"):
        return _fail(r_hi.mesh, r_hi.trace, f"waist bracket does not separate escapes ({r_lo.reason}, {r_hi.reason})", 0, raise_on_failure)
    res = r_hi
    for k in range(1, max_bisections + 1):
        mid = 0.5 * (lo + hi)
        res = run(mid)
        if res.converged:
            res.meta.update(waist_scale=1 + mid, bisections=k)
            return res
        if res.reason == "pinches":
            lo = mid
        elif res.reason == "opens":
            hi = mid
        else:
            return _fail(res.mesh, res.trace, res.reason, res.retries, raise_on_failure)
    return _fail(res.mesh, res.trace, f"no critical annulus after {max_bisections} bisections", res.retries, raise_on_failure)
