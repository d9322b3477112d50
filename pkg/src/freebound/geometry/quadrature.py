"""Tensor Gauss-Legendre quadrature over chart boxes and boundary faces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import QuadratureNonConvergence
from .core import DTYPE, local_geometry, spd_inverse_det
from .operators import face_points

CERTIFY_RTOL = 1e-10
CERTIFY_ATOL = 1e-14
MAX_POINTS = 512


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule with ``points_per_axis`` nodes on each axis."""

    points_per_axis: int
    kind: str = "gauss-legendre"

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be at least 2")

    def nodes_weights(self, lower, upper):
        """Nodes ``(N, d)`` and weights ``(N,)`` on the box ``[lower, upper]``."""
        x, w = np.polynomial.legendre.leggauss(self.points_per_axis)
        x = x.astype(DTYPE)
        w = w.astype(DTYPE)
        lower = np.asarray(lower, dtype=DTYPE)
        upper = np.asarray(upper, dtype=DTYPE)
        axes_x, axes_w = [], []
        for lo, hi in zip(lower, upper):
            half = (hi - lo) / 2
            axes_x.append(lo + half * (x + 1))
            axes_w.append(half * w)
        grids = np.meshgrid(*axes_x, indexing="ij")
        wgrids = np.meshgrid(*axes_w, indexing="ij")
        nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
        weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
        return nodes, weights

    def doubled(self) -> "QuadratureRule":
        return QuadratureRule(2 * self.points_per_axis, self.kind)


@dataclass
class Integral:
    value: float
    points_per_axis: int
    history: list = field(default_factory=list)


def _integrate_box(surf, integrand, rule):
    nodes, weights = rule.nodes_weights(surf.lower, surf.upper)
    geo = local_geometry(surf, nodes, gate=False)
    return np.sum(weights * integrand(geo) * geo.sqrt_detg)


def _integrate_faces(surf, integrand, rule, faces=None):
    faces = surf.boundary_faces if faces is None else faces
    total = DTYPE(0)
    for axis, side in faces:
        others = [i for i in range(surf.dim) if i != axis]
        lo = [surf.lower[i] for i in others]
        hi = [surf.upper[i] for i in others]
        nodes, weights = rule.nodes_weights(lo, hi)
        P = face_points(surf, axis, side, nodes)
        geo = local_geometry(surf, P, gate=False)
        gb = geo.g[:, others][:, :, others]
        _, det = spd_inverse_det(gb)
        total = total + np.sum(weights * integrand(geo, axis, side) * np.sqrt(det))
    return total


def certified(compute, rule: QuadratureRule, certify=True, rtol=CERTIFY_RTOL, atol=CERTIFY_ATOL) -> Integral:
    """Evaluate ``compute(rule)`` and double the rule until the relative change is below ``rtol``.

    A change below ``atol`` also counts as settled (integrals that vanish).
    ``compute`` may return a vector of integrals sharing the same nodes; all
    components must settle.
    """
    value = np.asarray(compute(rule), dtype=DTYPE)
    hist = [(rule.points_per_axis, _as_float(value))]
    if not certify:
        return Integral(_as_float(value), rule.points_per_axis, hist)
    changes = []
    while True:
        if 2 * rule.points_per_axis > MAX_POINTS:
            raise QuadratureNonConvergence("quadrature did not settle", history=hist)
        nxt = rule.doubled()
        new = np.asarray(compute(nxt), dtype=DTYPE)
        hist.append((nxt.points_per_axis, _as_float(new)))
        diff = np.abs(new - value)
        rel = diff / np.maximum(np.maximum(np.abs(new), np.abs(value)), 1e-300)
        open_ = ~((rel < rtol) | (diff < atol))
        if not np.any(open_):
            return Integral(_as_float(new), nxt.points_per_axis, hist)
        change = float(np.max(rel[open_]))
        if changes and change >= changes[-1]:
            raise QuadratureNonConvergence(
                f"relative change stopped decreasing ({changes[-1]:.3e} -> {change:.3e})",
                history=hist,
            )
        changes.append(change)
        rule, value = nxt, new


def _as_float(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def integrate_surface_many(surf, integrands, rule: QuadratureRule, certify=True) -> Integral:
    """Several ``int_M f dmu`` on shared nodes; ``value`` is an array."""

    def compute(r):
        nodes, weights = r.nodes_weights(surf.lower, surf.upper)
        geo = local_geometry(surf, nodes, gate=False)
        w = weights * geo.sqrt_detg
        return [np.sum(w * f(geo)) for f in integrands]

    return certified(compute, rule, certify)


def integrate_boundary_many(surf, integrands, rule: QuadratureRule, certify=True) -> Integral:
    """Several ``int_{dM} f dS`` on shared nodes; each ``f(geo, axis, side)``."""
    if not surf.boundary_faces:
        raise ValueError(f"{surf.name} has no boundary faces")
    return certified(lambda r: _integrate_faces_many(surf, integrands, r), rule, certify)


def _integrate_faces_many(surf, integrands, rule):
    total = np.zeros(len(integrands), dtype=DTYPE)
    for axis, side in surf.boundary_faces:
        others = [i for i in range(surf.dim) if i != axis]
        nodes, weights = rule.nodes_weights([surf.lower[i] for i in others], [surf.upper[i] for i in others])
        geo = local_geometry(surf, face_points(surf, axis, side, nodes), gate=False)
        _, det = spd_inverse_det(geo.g[:, others][:, :, others])
        w = weights * np.sqrt(det)
        total += np.array([np.sum(w * f(geo, axis, side)) for f in integrands], dtype=DTYPE)
    return total


def integrate_surface(surf, integrand, rule: QuadratureRule, certify=True) -> Integral:
    """``int_M integrand dmu``; ``integrand`` maps a LocalGeometry to values."""
    return certified(lambda r: _integrate_box(surf, integrand, r), rule, certify)


def integrate_boundary(surf, integrand, rule: QuadratureRule, certify=True) -> Integral:
    """``int_{dM} integrand dS``; ``integrand(geo, axis, side)``."""
    if not surf.boundary_faces:
        raise ValueError(f"{surf.name} has no boundary faces")
    return certified(lambda r: _integrate_faces(surf, integrand, r), rule, certify)


def default_rule(surf) -> QuadratureRule:
    """32 points per axis for surfaces, 16 in higher dimension (the rule is then certified by doubling)."""
    return QuadratureRule(32 if surf.dim == 2 else 16)


def surface_area(surf, quad: QuadratureRule | None = None, certify=True) -> float:
    """``|M|``, the n-volume of the hypersurface."""
    quad = quad or default_rule(surf)
    return integrate_surface(surf, lambda geo: 1, quad, certify).value


def boundary_volume(surf, quad: QuadratureRule | None = None, certify=True) -> float:
    """``|dM|``, the (n-1)-volume of the boundary faces."""
    quad = quad or default_rule(surf)
    return integrate_boundary(surf, lambda geo, a, s: 1, quad, certify).value
