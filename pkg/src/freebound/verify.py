"""Residual checks of the elliptic, boundary and integral identities.

Every check returns a :class:`VerificationReport`.  Pointwise quantities
(``h_ij``, ``|A|^2``, ``s_V``, ``u``) come from exact chart jets; the outer
derivative (Laplacian, gradient, covariant derivative of ``A``, normal
derivative at the boundary) is a finite difference with step ``h``.  The
residuals are therefore pure discretisation error, ``O(h^order)``.

Sign conventions: ``h_ij = -<d_i d_j F, nu>`` (outward unit sphere has
``H = +n``); ``s_V`` and ``u`` change sign with the normal, every residual
below is even in the normal.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PreconditionViolation, ZeroGraphQuantityError
from .geometry.core import KillingField, ParametricHypersurface, fd_derivatives, local_geometry
from .geometry.operators import (
    DEFAULT_H,
    boundary_frame,
    face_points,
    covariant_second_form,
    field_derivatives,
    geometric_field,
    grad_norm_sq_from,
    inner_grad,
    laplacian_from,
    nabla_A_norm_sq_from,
)
from .geometry.quadrature import (
    QuadratureRule,
    _integrate_faces,
    boundary_volume,
    default_rule,
    integrate_boundary,
    integrate_boundary_many,
    integrate_surface,
    integrate_surface_many,
    surface_area,
)

REPORT_VERSION = 1
MINIMALITY_GATE = 1e-7
FREE_BOUNDARY_GATE = 1e-8
GRAPH_CUTOFF = 0.05
INTERIOR_TOL = 1e-3
BOUNDARY_TOL = 5e-3
EDGE_MARGIN = 1e-3
GRAPH_ORDER = 4  # stencil order for checks involving v = 1/s_V


# ---------------------------------------------------------------- reports


@dataclass
class VerificationReport:
    """One identity check.  ``passed`` is ``residual_max < tolerance``.

    Non-finite residuals are written as JSON ``null`` and read back as ``inf``.
    """

    check_name: str
    surface_id: str
    grid: dict
    residual_max: float
    residual_l2: float
    tolerance: float
    h_used: float | None
    passed: bool = field(init=False)
    notes: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.residual_max = math.inf if self.residual_max is None else float(self.residual_max)
        self.residual_l2 = math.inf if self.residual_l2 is None else float(self.residual_l2)
        self.passed = bool(self.residual_max < self.tolerance)

    def to_dict(self) -> dict:
        d = {"report_version": REPORT_VERSION}
        d.update(asdict(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        if d.get("report_version") != REPORT_VERSION:
            raise ValueError(f"unsupported report_version {d.get('report_version')!r}")
        keys = ("check_name", "surface_id", "grid", "residual_max", "residual_l2", "tolerance", "h_used", "notes", "details")
        return cls(**{k: d[k] for k in keys})


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def dumps(obj, indent=2) -> str:
    """JSON with every float written to 17 significant digits (non-finite as null)."""
    import json

    def enc(x, lvl):
        pad = " " * (indent * (lvl + 1))
        end = " " * (indent * lvl)
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, lvl + 1)}" for k, v in x.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(x, list):
            if not x:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(v, lvl + 1) for v in x) + "\n" + end + "]"
        if isinstance(x, bool) or x is None:
            return json.dumps(x)
        if isinstance(x, float):
            return f"{x:.17g}" if math.isfinite(x) else "null"
        return json.dumps(x)

    return enc(_plain(obj), 0)


def _norms(r) -> tuple[float, float]:
    r = np.abs(np.asarray(r, dtype=float)).reshape(-1)
    if r.size == 0:
        return 0.0, 0.0
    return float(r.max()), float(np.sqrt(np.mean(r**2)))


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class SampleGrid:
    """Cell-centred tensor grid on a sub-box of the parameter domain.

    ``mask`` optionally keeps a subset of the tensor points (graphical region).
    """

    lower: tuple
    upper: tuple
    counts: tuple
    kind: str = "interior"
    mask: tuple | None = None

    def tensor_points(self) -> np.ndarray:
        axes = []
        for lo, hi, k in zip(self.lower, self.upper, self.counts):
            step = (hi - lo) / k
            axes.append(lo + step * (np.arange(k) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def points(self) -> np.ndarray:
        P = self.tensor_points()
        if self.mask is not None:
            P = P[np.asarray(self.mask, dtype=bool)]
        return P

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "counts": list(self.counts),
            "n_points": int(len(self.points())),
        }


def interior_grid(surf: ParametricHypersurface, counts=24, lower=None, upper=None) -> SampleGrid:
    """Cell-centred grid over the whole box (or the given sub-box)."""
    counts = (counts,) * surf.dim if np.isscalar(counts) else tuple(counts)
    lo = tuple(float(x) for x in (surf.lower if lower is None else lower))
    hi = tuple(float(x) for x in (surf.upper if upper is None else upper))
    return SampleGrid(lo, hi, counts, "interior")


def graphical_subgrid(surf, V: KillingField, grid: SampleGrid, cutoff=GRAPH_CUTOFF) -> SampleGrid:
    """Restrict ``grid`` to the points where ``|s_V| > cutoff``."""
    P = grid.tensor_points()
    sv = np.asarray(local_geometry(surf, P).s_v(V), dtype=float)
    keep = np.abs(sv) > cutoff
    if grid.mask is not None:
        keep &= np.asarray(grid.mask, dtype=bool)
    return SampleGrid(grid.lower, grid.upper, grid.counts, "graphical", tuple(bool(k) for k in keep))


@dataclass(frozen=True)
class BoundaryGrid:
    """Samples on each boundary face; ``counts`` per tangential axis."""

    samples_per_face: int = 64

    def face_samples(self, surf, axis):
        others = [i for i in range(surf.dim) if i != axis]
        k = max(2, round(self.samples_per_face ** (1 / len(others))))
        axes = []
        for i in others:
            lo, hi = surf.lower[i], surf.upper[i]
            if surf.periodic[i]:
                axes.append(lo + (hi - lo) * np.arange(k) / k)
            else:
                axes.append(lo + (hi - lo) * (np.arange(k) + 0.5) / k)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def points(self, surf):
        """List of ``(axis, side, P)`` for every boundary face."""
        out = []
        for axis, side in surf.boundary_faces:
            out.append((axis, side, face_points(surf, axis, side, self.face_samples(surf, axis))))
        return out

    def describe(self, surf=None) -> dict:
        d = {"kind": "boundary", "samples_per_face": self.samples_per_face}
        if surf is not None:
            d["faces"] = [list(f) for f in surf.boundary_faces]
            d["n_points"] = int(sum(len(P) for _, _, P in self.points(surf)))
        return d


# ---------------------------------------------------------------- gates


def require_minimal(surf: ParametricHypersurface, P) -> float:
    """Raise :class:`PreconditionViolation` unless ``surf`` is flagged minimal and ``max|H|`` is tiny."""
    if not surf.minimal:
        raise PreconditionViolation(f"{surf.name} is not flagged minimal")
    hmax = float(np.max(np.abs(np.asarray(local_geometry(surf, P).H, dtype=float))))
    if hmax > MINIMALITY_GATE:
        raise PreconditionViolation(f"{surf.name}: max|H| = {hmax:.3e} exceeds gate {MINIMALITY_GATE:g}")
    return hmax


def require_free_boundary(surf: ParametricHypersurface, bgrid: BoundaryGrid) -> float:
    if not surf.free_boundary:
        raise PreconditionViolation(f"{surf.name} is not flagged free-boundary")
    worst = 0.0
    for _, _, P in bgrid.points(surf):
        geo = local_geometry(surf, P)
        r = np.abs(np.einsum("ba,ba->b", geo.normal, geo.F)).max()
        worst = max(worst, float(r))
    if worst > FREE_BOUNDARY_GATE:
        raise PreconditionViolation(f"{surf.name}: free-boundary residual {worst:.3e}")
    return worst


def require_graphical(surf, V, P, cutoff=GRAPH_CUTOFF):
    if len(P) == 0:
        raise ZeroGraphQuantityError("no grid point with |s_V| above the cutoff", points=np.zeros((0, surf.dim)))
    sv = np.asarray(local_geometry(surf, P).s_v(V), dtype=float)
    bad = np.abs(sv) <= cutoff
    if np.any(bad):
        raise ZeroGraphQuantityError(
            f"|s_V| <= {cutoff:g} at {int(bad.sum())} grid point(s)",
            points=np.asarray(P, dtype=float)[bad],
        )


# ---------------------------------------------------------------- interior identities


def _fd(surf, name, P, h, order, V=None, second=True):
    return field_derivatives(surf, geometric_field(surf, name, V), P, h, order, one_sided=False, second=second)


def check_graph_laplacian(surf, V: KillingField, grid: SampleGrid | None = None, h=DEFAULT_H, order=2, tol=INTERIOR_TOL):
    """``Delta s_V + |A|^2 s_V = 0``."""
    grid = grid or interior_grid(surf)
    P = grid.points()
    require_minimal(surf, P)
    fd = _fd(surf, "s_v", P, h, order, V)
    r = laplacian_from(fd) + fd.geo.A2 * fd.value
    mx, l2 = _norms(r)
    return VerificationReport("graph_laplacian", surf.name, grid.describe(), mx, l2, tol, h, notes=f"V={V.name or 'custom'}")


def check_v2_identity(surf, V, grid: SampleGrid | None = None, h=DEFAULT_H, order=GRAPH_ORDER, tol=INTERIOR_TOL):
    """``Delta v^2 = 2|A|^2 v^2 + 6|grad v|^2`` with ``v = 1/s_V``, on ``|s_V| > 0.05``.

    Powers of ``1/s_V`` amplify the truncation error, so the default
    stencil order here is 4.
    """
    grid = grid or interior_grid(surf)
    P = grid.points()
    require_graphical(surf, V, P)
    require_minimal(surf, P)
    fv2 = _fd(surf, "v_sq", P, h, order, V)
    fv = _fd(surf, "v", P, h, order, V, second=False)
    r = laplacian_from(fv2) - 2 * fv2.geo.A2 * fv2.value - 6 * grad_norm_sq_from(fv)
    mx, l2 = _norms(r)
    return VerificationReport("v2_identity", surf.name, grid.describe(), mx, l2, tol, h, notes=f"V={V.name or 'custom'}")


def check_u2_identity(surf, grid: SampleGrid | None = None, h=DEFAULT_H, order=2, tol=INTERIOR_TOL):
    """``Delta u^2 = -2|A|^2 u^2 + 2|grad u|^2``."""
    grid = grid or interior_grid(surf)
    P = grid.points()
    require_minimal(surf, P)
    fu2 = _fd(surf, "u_sq", P, h, order)
    fu = _fd(surf, "support", P, h, order, second=False)
    r = laplacian_from(fu2) + 2 * fu2.geo.A2 * fu2.value - 2 * grad_norm_sq_from(fu)
    mx, l2 = _norms(r)
    return VerificationReport("u2_identity", surf.name, grid.describe(), mx, l2, tol, h)


def check_q_inequality(surf, V, grid: SampleGrid | None = None, h=DEFAULT_H, order=GRAPH_ORDER, tol=INTERIOR_TOL):
    """``D = Delta Q - 2<grad v / v, grad Q> >= 0`` and ``D = 2|v grad u + u grad v|^2``.

    ``residual_max`` is the larger of the violation ``max(0, -min D)`` and
    the identity residual ``max|D - 2|v grad u + u grad v|^2|``.
    """
    grid = grid or interior_grid(surf)
    P = grid.points()
    require_graphical(surf, V, P)
    require_minimal(surf, P)
    fq = _fd(surf, "q", P, h, order, V)
    fv = _fd(surf, "v", P, h, order, V, second=False)
    fu = _fd(surf, "support", P, h, order, second=False)
    geo = fq.geo
    v, u = fv.value, fu.value
    D = laplacian_from(fq) - 2 * inner_grad(geo, fv.d1 / v[:, None], fq.d1)
    w = v[:, None] * fu.d1 + u[:, None] * fv.d1
    square = 2 * inner_grad(geo, w, w)
    expanded = (
        2 * v**2 * inner_grad(geo, fu.d1, fu.d1)
        + 2 * u**2 * inner_grad(geo, fv.d1, fv.d1)
        + 4 * u * v * inner_grad(geo, fv.d1, fu.d1)
    )
    violation = float(max(0.0, -float(np.min(D))))
    ident_max, ident_l2 = _norms(D - square)
    alg = float(np.max(np.abs(np.asarray(expanded - square, dtype=float))))
    mx = max(violation, ident_max)
    details = {
        "min_D": float(np.min(D)),
        "violation": violation,
        "identity_residual_max": ident_max,
        "algebraic_residual_max": alg,
    }
    return VerificationReport(
        "q_inequality", surf.name, grid.describe(), mx, ident_l2, tol, h, notes=f"V={V.name or 'custom'}", details=details
    )


def check_simons(surf, grid: SampleGrid | None = None, h=DEFAULT_H, order=2, tol=INTERIOR_TOL):
    """``1/2 Delta |A|^2 = |nabla A|^2 - |A|^4``."""
    grid = grid or interior_grid(surf)
    P = grid.points()
    require_minimal(surf, P)
    fa = _fd(surf, "a_norm_sq", P, h, order)
    nh, geo = covariant_second_form(surf, P, h, order)
    r = 0.5 * laplacian_from(fa) - nabla_A_norm_sq_from(nh, geo) + geo.A2**2
    mx, l2 = _norms(r)
    return VerificationReport("simons", surf.name, grid.describe(), mx, l2, tol, h)


# ---------------------------------------------------------------- boundary


def _normal_derivative(surf, name, P, h, order, conormal, gate=True):
    """``eta^i d_i f`` with one-sided stencils at the face."""
    f = geometric_field(surf, name, gate=gate)
    _, d1, _ = fd_derivatives(f, P, h, order=order, domain=surf, one_sided=True, second=False)
    return np.einsum("bi,bi...->b...", conormal, d1)


def boundary_relation_terms(surf, bgrid: BoundaryGrid, h=DEFAULT_H, order=4):
    """Per-face arrays of the boundary quantities in the adapted frame."""
    out = []
    n = surf.dim
    for axis, side, P in bgrid.points(surf):
        fr = boundary_frame(surf, P, axis, side)
        geo = fr.geo
        eta = fr.conormal
        hf = fr.h_frame  # (B, n, n), last index is the conormal
        nh, _ = covariant_second_form(surf, P, h, order, one_sided=True)
        dn_h = np.einsum("bi,bijk->bjk", eta, nh)
        dn_h_frame = np.einsum("bja,bjk,bkc->bac", fr.frame, dn_h, fr.frame)
        dn_H = _normal_derivative(surf, "mean_curvature", P, h, order, eta)
        dn_A2 = _normal_derivative(surf, "a_norm_sq", P, h, order, eta)
        h_nn = hf[:, n - 1, n - 1]
        out.append(
            {
                "axis": axis,
                "side": side,
                "h_in": hf[:, : n - 1, n - 1],
                "h_nn": h_nn,
                "h_ii": np.stack([hf[:, i, i] for i in range(n - 1)], axis=1),
                "dn_h_ii": np.stack([dn_h_frame[:, i, i] for i in range(n - 1)], axis=1),
                "dn_H": dn_H,
                "dn_A2": dn_A2,
                "A2": geo.A2,
                "conormal_vs_position": np.linalg.norm(
                    np.asarray(fr.conormal_ambient - geo.F, dtype=float), axis=1
                ),
            }
        )
    return out


def check_boundary_relations(surf, bgrid: BoundaryGrid | None = None, h=DEFAULT_H, order=4, tol=BOUNDARY_TOL):
    """``h_in = 0``, ``nabla_n H = 0`` and ``nabla_n h_ii = h_nn - h_ii`` in the adapted frame."""
    bgrid = bgrid or BoundaryGrid()
    P_all = np.concatenate([P for _, _, P in bgrid.points(surf)])
    require_minimal(surf, P_all)
    require_free_boundary(surf, bgrid)
    terms = boundary_relation_terms(surf, bgrid, h, order)
    h_in = np.concatenate([t["h_in"].reshape(-1) for t in terms])
    dnH = np.concatenate([t["dn_H"] for t in terms])
    rel = np.concatenate([(t["dn_h_ii"] - (t["h_nn"][:, None] - t["h_ii"])).reshape(-1) for t in terms])
    a = _norms(h_in)
    b = _norms(dnH)
    c = _norms(rel)
    frame_res = max(float(t["conormal_vs_position"].max()) for t in terms)
    mx = max(a[0], b[0], c[0])
    l2 = float(np.sqrt(np.mean(np.concatenate([np.asarray(x, dtype=float) ** 2 for x in (h_in, dnH, rel)]))))
    details = {
        "h_in_max": a[0],
        "dn_H_max": b[0],
        "dn_h_ii_relation_max": c[0],
        "conormal_minus_position_max": frame_res,
        "stencil_order": order,
    }
    return VerificationReport("boundary_relations", surf.name, bgrid.describe(surf), mx, l2, tol, h, details=details)


def check_normal_derivative_A2(surf, bgrid: BoundaryGrid | None = None, h=DEFAULT_H, order=4, tol=BOUNDARY_TOL):
    """``nabla_n |A|^2 + 2|A|^2 + 2n h_nn^2 = 0`` on the boundary."""
    bgrid = bgrid or BoundaryGrid()
    P_all = np.concatenate([P for _, _, P in bgrid.points(surf)])
    require_minimal(surf, P_all)
    require_free_boundary(surf, bgrid)
    terms = boundary_relation_terms(surf, bgrid, h, order)
    n = surf.dim
    r = np.concatenate([t["dn_A2"] + 2 * t["A2"] + 2 * n * t["h_nn"] ** 2 for t in terms])
    mx, l2 = _norms(r)
    details = {"dn_A2": [float(t["dn_A2"].mean()) for t in terms], "stencil_order": order}
    return VerificationReport("normal_derivative_A2", surf.name, bgrid.describe(surf), mx, l2, tol, h, details=details)


# ---------------------------------------------------------------- integral identities


def check_isoperimetric(surf, quad: QuadratureRule | None = None, tol=1e-9):
    """Relative residual ``|n|M| - |dM|| / |dM|``.

    Also evaluates the divergence-theorem ingredients: ``int_M |grad F|^2``
    against ``int_dM <nabla_eta F, F>``, and ``max |<eta, F> - 1|`` on the
    boundary.  No minimality gate: the control surface is expected to fail.
    """
    quad = quad or default_rule(surf)
    n = surf.dim

    def grad_F_sq(geo):
        return np.einsum("bij,bia,bja->b", geo.ginv, geo.D, geo.D)

    def eta_dot_F(geo, axis, side):
        sign = 1 if side == 1 else -1
        gk = geo.ginv[:, :, axis]
        eta = sign * gk / np.sqrt(gk[:, axis])[:, None]
        return np.einsum("bi,bia,ba->b", eta, geo.D, geo.F)

    area, lhs = integrate_surface_many(surf, [lambda geo: 1, grad_F_sq], quad).value
    bvol, rhs = integrate_boundary_many(surf, [lambda geo, a, s: 1, eta_dot_F], quad).value
    res = abs(n * area - bvol) / bvol
    worst = 0.0
    for axis, side, P in BoundaryGrid().points(surf):
        geo = local_geometry(surf, P)
        worst = max(worst, float(np.max(np.abs(np.asarray(eta_dot_F(geo, axis, side), dtype=float) - 1))))
    details = {
        "area": area,
        "boundary_volume": bvol,
        "int_grad_F_sq": lhs,
        "int_conormal_dot_F": rhs,
        "divergence_identity_residual": abs(lhs - rhs) / bvol,
        "grad_F_sq_minus_n_integral": abs(lhs - n * area) / bvol,
        "conormal_dot_F_minus_one_max": worst,
    }
    grid = {"kind": "quadrature", "points_per_axis": quad.points_per_axis}
    return VerificationReport("isoperimetric", surf.name, grid, res, res, tol, None, details=details)


def _laplacian_A2_nodes(surf, P, h, order):
    fd = field_derivatives(surf, geometric_field(surf, "a_norm_sq", gate=False), P, h, order, one_sided=True, gate=False)
    return laplacian_from(fd), fd


def _flux_points(surf, quad_points):
    return quad_points or (48 if surf.dim == 2 else 24)


def _interior_laplacian(surf, quad_points, h, order):
    rule = QuadratureRule(quad_points)
    nodes, weights = rule.nodes_weights(surf.lower, surf.upper)
    lap, fd = _laplacian_A2_nodes(surf, nodes, h, order)
    return rule, nodes, weights, lap, fd.geo


def check_flux_balance(surf, quad_points=None, h=DEFAULT_H, order=4, tol=1e-5, _interior=None):
    """Divergence theorem for ``|A|^2``: ``int_M Delta|A|^2 = int_dM nabla_eta |A|^2``.

    Holds for any surface.  For minimal free-boundary surfaces the boundary
    flux is also compared with ``-(2|A|^2 + 2n h_nn^2)`` from exact geometry.
    """
    quad_points = _flux_points(surf, quad_points)
    rule, _, weights, lap, geo = _interior or _interior_laplacian(surf, quad_points, h, order)
    int_lap = np.sum(weights * lap * geo.sqrt_detg)
    n = surf.dim

    def flux_fd(geo, axis, side):
        sign = 1 if side == 1 else -1
        gk = geo.ginv[:, :, axis]
        eta = sign * gk / np.sqrt(gk[:, axis])[:, None]
        return _normal_derivative(surf, "a_norm_sq", geo.P, h, order, eta, gate=False)

    int_flux = _integrate_faces(surf, flux_fd, rule)
    res_div = abs(float(int_lap - int_flux))
    details = {
        "int_laplacian_A2": float(int_lap),
        "int_normal_derivative_A2": float(int_flux),
        "divergence_residual": res_div,
    }
    res = res_div
    if surf.minimal and surf.free_boundary:

        def flux_closed(geo, axis, side):
            fr = boundary_frame(surf, geo.P, axis, side)
            hnn = fr.h_frame[:, n - 1, n - 1]
            return -(2 * geo.A2 + 2 * n * hnn**2)

        int_closed = _integrate_faces(surf, flux_closed, rule)
        details["int_boundary_formula"] = float(int_closed)
        details["boundary_formula_residual"] = abs(float(int_lap - int_closed))
        res = max(res, details["boundary_formula_residual"])
    grid = {"kind": "quadrature", "points_per_axis": quad_points}
    return VerificationReport("flux_balance", surf.name, grid, res, res, tol, h, details=details)


def curvature_gap_report(surf, grid: SampleGrid | None = None, quad_points=None, h=DEFAULT_H, order=4, tol=1e-5):
    """Ingredients of the curvature-gap inequality and of its proof.

    Reports ``sup_M |A|^2``, ``inf_dM |A|^2`` and ``(sup)^2 - n inf``; the
    residual is the larger of the flux balance and of
    ``|int|nabla A|^2 - int|A|^4 - 1/2 int Delta|A|^2|``.  The inequality
    itself concerns non-flat disks, none of which is available explicitly,
    so its sign is reported and not asserted.
    """
    grid = grid or interior_grid(surf, 48 if surf.dim == 2 else 12)
    P = grid.points()
    require_minimal(surf, P)
    n = surf.dim
    bgrid = BoundaryGrid()
    Pb = np.concatenate([Q for _, _, Q in bgrid.points(surf)])
    # sup over the sample grid together with the boundary samples
    a_int = np.asarray(local_geometry(surf, np.concatenate([P, Pb]), gate=False).A2, dtype=float)
    a_bdry = np.asarray(local_geometry(surf, Pb).A2, dtype=float)
    sup_a, inf_b = float(a_int.max()), float(a_bdry.min())
    gap = sup_a**2 - n * inf_b

    quad_points = _flux_points(surf, quad_points)
    interior = _interior_laplacian(surf, quad_points, h, order)
    flux = check_flux_balance(surf, quad_points, h, order, tol, _interior=interior)
    _, nodes, weights, lap, _ = interior
    nh, geo = covariant_second_form(surf, nodes, h, order, one_sided=True, gate=False)
    dmu = weights * geo.sqrt_detg
    i_nabla = float(np.sum(dmu * nabla_A_norm_sq_from(nh, geo)))
    i_a4 = float(np.sum(dmu * geo.A2**2))
    i_lap = float(np.sum(dmu * lap))
    chain = abs(i_nabla - i_a4 - 0.5 * i_lap)
    res = max(flux.residual_max, chain)
    details = {
        "sup_A2": sup_a,
        "inf_boundary_A2": inf_b,
        "gap_value": gap,
        "int_nabla_A_sq": i_nabla,
        "int_A4": i_a4,
        "int_laplacian_A2": i_lap,
        "chain_residual": chain,
        "flux": flux.details,
        "topology": surf.topology,
    }
    notes = (
        "inequality hypothesis (non-flat disk) not instantiated; "
        f"gap sign reported only ({'>' if gap > 0 else '<=' } 0)"
    )
    g = {"kind": "quadrature+sup", "points_per_axis": quad_points, "sup_grid": grid.describe()}
    return VerificationReport("curvature_gap", surf.name, g, res, res, tol, h, notes=notes, details=details)


# ---------------------------------------------------------------- zeros of s_V


@dataclass
class ZeroSearchResult:
    killing: str
    zeros: np.ndarray  # (k, n) parameter locations
    min_value: float
    max_value: float
    min_abs: float
    certified_positive: bool
    margin: float
    identically_zero: bool = False

    @property
    def found(self) -> bool:
        return len(self.zeros) > 0


def killing_zero_search(surf, V: KillingField, counts=64, tol=1e-10, zero_tol=1e-12) -> ZeroSearchResult:
    """Sign scan of ``s_V`` on a dense grid, with bisection of each crossing.

    Crossings are searched along every grid line; each one is refined by
    bisection to ``tol`` in the parameter.  Without sign changes the result
    is certified positive (or negative) when ``min|s_V|`` exceeds a
    Lipschitz bound times half the grid diagonal.
    """
    counts = (counts,) * surf.dim if np.isscalar(counts) else tuple(counts)
    axes = []
    for i, k in enumerate(counts):
        lo, hi = surf.lower[i], surf.upper[i]
        if (i, 0) in surf.singular_faces:
            lo += EDGE_MARGIN
        if (i, 1) in surf.singular_faces:
            hi -= EDGE_MARGIN
        if surf.periodic[i]:
            axes.append(np.linspace(lo, hi, k, endpoint=False))
        else:
            axes.append(np.linspace(lo, hi, k))
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.stack([m.reshape(-1) for m in mesh], axis=1)
    S = np.asarray(local_geometry(surf, P, gate=False).s_v(V), dtype=float).reshape(counts)
    P = P.reshape(tuple(counts) + (surf.dim,))

    def sv(points):
        return np.asarray(local_geometry(surf, np.atleast_2d(points), gate=False).s_v(V), dtype=float)

    zeros = []
    exact = np.abs(S) < zero_tol
    if np.all(exact):
        zeros = P.reshape(-1, surf.dim)[: min(S.size, 16)]
        return ZeroSearchResult(V.name, np.asarray(zeros), float(S.min()), float(S.max()), 0.0, False, 0.0, True)
    for p in P[exact]:
        zeros.append(p)
    for ax in range(surf.dim):
        a = S
        b = np.roll(S, -1, axis=ax)
        pa = P
        pb = np.roll(P, -1, axis=ax)
        valid = np.ones(S.shape, dtype=bool)
        if not surf.periodic[ax]:
            idx = [slice(None)] * surf.dim
            idx[ax] = -1
            valid[tuple(idx)] = False
        else:
            # wrap-around neighbour differs by a full period
            idx = [slice(None)] * surf.dim
            idx[ax] = -1
            shift = np.zeros(surf.dim)
            shift[ax] = surf.upper[ax] - surf.lower[ax]
            pb = pb.copy()
            pb[tuple(idx)] += shift
        cross = valid & (a * b < 0) & ~exact & ~np.roll(exact, -1, axis=ax)
        for lo_p, hi_p, lo_v in zip(pa[cross], pb[cross], a[cross]):
            lo_p, hi_p = lo_p.copy(), hi_p.copy()
            s_lo = np.sign(lo_v)
            while np.max(np.abs(hi_p - lo_p)) > tol:
                mid = 0.5 * (lo_p + hi_p)
                if np.sign(sv(mid)[0]) == s_lo:
                    lo_p = mid
                else:
                    hi_p = mid
            zeros.append(0.5 * (lo_p + hi_p))
    zeros = np.asarray(zeros).reshape(-1, surf.dim)
    min_abs = float(np.abs(S).min())
    # Lipschitz estimate from grid differences, per axis
    lip = 0.0
    half = 0.0
    for ax in range(surf.dim):
        step = axes[ax][1] - axes[ax][0]
        diff = np.abs(np.diff(S, axis=ax)).max() / step
        lip = max(lip, float(diff))
        half += (step / 2) ** 2
    margin = 2 * lip * math.sqrt(half)  # safety factor 2 on the difference-quotient estimate
    certified = len(zeros) == 0 and min_abs > margin
    return ZeroSearchResult(V.name, zeros, float(S.min()), float(S.max()), min_abs, certified, margin)


def zero_search_report(surf, V: KillingField, counts=None) -> VerificationReport:
    """Zero search as a report: for non-disk topology a zero of ``s_V`` is expected."""
    counts = counts or (64 if surf.dim == 2 else 16)
    res = killing_zero_search(surf, V, counts)
    details = {
        "zeros_found": int(len(res.zeros)),
        "identically_zero": res.identically_zero,
        "min_s_V": res.min_value,
        "max_s_V": res.max_value,
        "min_abs_s_V": res.min_abs,
        "certified_sign": res.certified_positive,
        "certification_margin": res.margin,
        "first_zero": res.zeros[0].tolist() if res.found else None,
    }
    if surf.topology == "disk":
        value, notes = 0.0, "disk topology: no zero required"
    else:
        value = 0.0 if res.found else res.min_abs
        notes = "zero of s_V expected for non-disk topology"
    grid = {"kind": "scan", "counts": [counts] * surf.dim}
    return VerificationReport("killing_zero", surf.name, grid, value, value, 1e-8, None, notes=f"V={V.name}; {notes}", details=details)


# ---------------------------------------------------------------- convergence


@dataclass
class ConvergenceStudy:
    hs: list
    residuals: list
    orders: list
    reports: list

    @property
    def min_order(self) -> float:
        return float(min(self.orders)) if self.orders else float("nan")


def convergence_study(check, hs=(2e-3, 1e-3, 5e-4), **kw) -> ConvergenceStudy:
    """Run ``check(h=...)`` for each step and fit observed orders between consecutive steps."""
    reps = [check(h=h, **kw) for h in hs]
    res = [r.residual_max for r in reps]
    orders = [math.log(res[i] / res[i + 1]) / math.log(hs[i] / hs[i + 1]) for i in range(len(hs) - 1)]
    return ConvergenceStudy(list(hs), res, orders, reps)


CHECKS = (
    "graph-laplacian",
    "v2",
    "u2",
    "q-inequality",
    "simons",
    "boundary-relations",
    "normal-derivative-A2",
    "isoperimetric",
    "curvature-gap",
    "flux-balance",
    "killing-zero",
)


def run_check(name: str, surf: ParametricHypersurface, V: KillingField | None = None, grid=24, h=DEFAULT_H, quad_points=None):
    """Dispatch a named check with battery defaults.

    ``v2`` and ``q-inequality`` run on the graphical part ``|s_V| > 0.05`` of
    the interior grid.  Gate failures become failed reports.
    """
    V = V or KillingField.basis(surf.ambient_dim)[surf.dim]  # translation along the last axis
    g = interior_grid(surf, grid)
    try:
        if name == "graph-laplacian":
            return check_graph_laplacian(surf, V, g, h)
        if name == "v2":
            return check_v2_identity(surf, V, graphical_subgrid(surf, V, g), h)
        if name == "u2":
            return check_u2_identity(surf, g, h)
        if name == "q-inequality":
            return check_q_inequality(surf, V, graphical_subgrid(surf, V, g), h)
        if name == "simons":
            return check_simons(surf, g, h)
        if name == "boundary-relations":
            return check_boundary_relations(surf, h=h)
        if name == "normal-derivative-A2":
            return check_normal_derivative_A2(surf, h=h)
        if name == "isoperimetric":
            return check_isoperimetric(surf, QuadratureRule(quad_points) if quad_points else None)
        if name == "curvature-gap":
            return curvature_gap_report(surf, quad_points=quad_points, h=h)
        if name == "flux-balance":
            return check_flux_balance(surf, quad_points, h=h)
        if name == "killing-zero":
            return zero_search_report(surf, V)
    except (PreconditionViolation, ZeroGraphQuantityError) as exc:
        return VerificationReport(
            name.replace("-", "_"), surf.name, {"kind": "gated"}, float("inf"), float("inf"), 0.0, h,
            notes=f"precondition failed: {exc}",
        )
    raise KeyError(f"unknown check {name!r}")
