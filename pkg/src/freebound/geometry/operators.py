"""Intrinsic differential operators on a chart, by finite differences.

Scalar and tensor fields are plain callables ``f(P) -> (B, ...)`` on
parameter points.  Geometric fields (``|A|^2``, ``s_V``, ``h_ij`` ...) are
evaluated from exact chart jets; only the outer derivative taken here is
a finite difference, with accuracy order 2 by default (4 on request).

    Laplace-Beltrami   Delta f = g^{ij} (d_i d_j f - Gamma^k_ij d_k f)
    gradient           (grad f)^i = g^{ij} d_j f
    covariant A        nabla_i h_jk = d_i h_jk - Gamma^l_ij h_lk - Gamma^l_ik h_jl
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import FrameConstructionError
from .core import (
    DTYPE,
    KillingField,
    ParametricHypersurface,
    _as_points,
    _is_single,
    _single,
    fd_derivatives,
    local_geometry,
)

DEFAULT_H = 1e-3


def geometric_field(surf: ParametricHypersurface, name: str, V: KillingField | None = None, gate=True):
    """A callable ``P -> values`` for one of the named geometric fields.

    Names: ``a_norm_sq``, ``mean_curvature``, ``support``, ``s_v``, ``v``
    (``1/s_V``), ``v_sq``, ``u_sq``, ``q``, ``second_form`` (``(B, n, n)``),
    ``position`` (``(B, n+1)``).
    """

    def f(P):
        geo = local_geometry(surf, P, gate=gate)
        if name == "a_norm_sq":
            return geo.A2
        if name == "mean_curvature":
            return geo.H
        if name == "support":
            return geo.support
        if name == "u_sq":
            return geo.support**2
        if name == "second_form":
            return geo.h
        if name == "position":
            return geo.F
        sv = geo.s_v(V)
        if name == "s_v":
            return sv
        if name == "v":
            return 1 / sv
        if name == "v_sq":
            return 1 / sv**2
        if name == "q":
            return geo.support**2 / sv**2
        raise KeyError(name)

    if name in ("s_v", "v", "v_sq", "q") and V is None:
        raise ValueError(f"field {name!r} needs a Killing field")
    return f


@dataclass
class FieldDerivatives:
    """A field with its FD parameter derivatives and the geometry at the centres."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray | None
    geo: object


def field_derivatives(surf, f, P, h=DEFAULT_H, order=2, one_sided=False, second=True, gate=True):
    P = _as_points(P, surf.dim)
    f0, d1, d2 = fd_derivatives(f, P, h, order=order, domain=surf, one_sided=one_sided, second=second)
    return FieldDerivatives(f0, d1, d2, local_geometry(surf, P, gate=gate))


def laplacian_from(fd: FieldDerivatives) -> np.ndarray:
    geo = fd.geo
    gam = geo.christoffel
    hess = fd.d2 - np.einsum("bkij,bk->bij", gam, fd.d1)
    return np.einsum("bij,bij->b", geo.ginv, hess)


def grad_norm_sq_from(fd: FieldDerivatives) -> np.ndarray:
    return np.einsum("bij,bi,bj->b", fd.geo.ginv, fd.d1, fd.d1)


def inner_grad(geo, a, b) -> np.ndarray:
    """``<grad a, grad b>`` from parameter gradients ``(B, n)``."""
    return np.einsum("bij,bi,bj->b", geo.ginv, a, b)


def laplace_beltrami(surf, f, p, h=DEFAULT_H, order=2, one_sided=False):
    """``Delta f`` at ``p`` (single point or batch).

    Interior points need the central stencil inside the parameter box
    unless ``one_sided`` is set; error is ``O(h^order)``.
    """
    fd = field_derivatives(surf, f, p, h, order, one_sided)
    return _single(laplacian_from(fd), _is_single(p))


def surface_gradient(surf, f, p, h=DEFAULT_H, order=2, one_sided=False):
    """Gradient components ``g^{ij} d_j f`` in the chart basis and ``|grad f|^2``."""
    fd = field_derivatives(surf, f, p, h, order, one_sided, second=False)
    vec = np.einsum("bij,bj->bi", fd.geo.ginv, fd.d1)
    one = _is_single(p)
    return _single(vec, one), _single(grad_norm_sq_from(fd), one)


def covariant_second_form(surf, P, h=DEFAULT_H, order=2, one_sided=False, gate=True):
    """``(nabla h)[b, i, j, k] = nabla_i h_jk`` and the geometry at ``P``."""
    P = _as_points(P, surf.dim)
    field = geometric_field(surf, "second_form", gate=gate)
    fd = field_derivatives(surf, field, P, h, order, one_sided, second=False, gate=gate)
    geo = fd.geo
    gam = geo.christoffel
    dh = fd.d1  # (B, i, j, k) = d_i h_jk
    nh = dh - np.einsum("blij,blk->bijk", gam, geo.h) - np.einsum("blik,bjl->bijk", gam, geo.h)
    return nh, geo


def nabla_A_norm_sq_from(nh, geo) -> np.ndarray:
    gi = geo.ginv
    return np.einsum("bip,bjq,bkr,bijk,bpqr->b", gi, gi, gi, nh, nh)


def nabla_A_norm_sq(surf, p, h=DEFAULT_H, order=2, one_sided=False):
    """``|nabla A|^2 = g^{ip} g^{jq} g^{kr} nabla_i h_jk nabla_p h_qr``."""
    nh, geo = covariant_second_form(surf, p, h, order, one_sided)
    return _single(nabla_A_norm_sq_from(nh, geo), _is_single(p))


@dataclass
class BoundaryFrame:
    """Adapted orthonormal frames at boundary points of one face.

    ``tangent[b, i, :]`` (i < n-1) are chart-coordinate vectors spanning
    ``T dM`` and diagonalising ``h`` there; ``conormal[b, :]`` is the
    outward unit conormal, equal to ``nu^{S^n} = F`` under the free boundary
    condition.  ``frame[b, :, a]`` stacks them with the conormal last.
    """

    axis: int
    side: int
    tangent: np.ndarray
    conormal: np.ndarray
    frame: np.ndarray
    conormal_ambient: np.ndarray
    geo: object

    @property
    def h_frame(self) -> np.ndarray:
        """``h(tau_a, tau_b)`` in the adapted frame."""
        E = self.frame
        return np.einsum("bia,bij,bjc->bac", E, self.geo.h, E)


def boundary_frame(surf, P, axis: int, side: int) -> BoundaryFrame:
    """Adapted frame at points ``P`` of the face ``(axis, side)``."""
    P = _as_points(P, surf.dim)
    geo = local_geometry(surf, P)
    n = surf.dim
    B = len(P)
    gk = geo.ginv[:, :, axis]
    gkk = gk[:, axis]
    if np.any(gkk <= 0):
        raise FrameConstructionError(f"{surf.name}: conormal undefined on face {(axis, side)}")
    sign = 1 if side == 1 else -1
    conormal = sign * gk / np.sqrt(gkk)[:, None]
    others = [i for i in range(n) if i != axis]
    g64 = np.asarray(geo.g, dtype=np.float64)
    h64 = np.asarray(geo.h, dtype=np.float64)
    tangent = np.zeros((B, n - 1, n), dtype=DTYPE)
    for b in range(B):
        Gb = g64[b][np.ix_(others, others)]
        Hb = h64[b][np.ix_(others, others)]
        try:
            _, vecs = scipy.linalg.eigh(Hb, Gb)
        except np.linalg.LinAlgError as exc:
            raise FrameConstructionError(f"{surf.name}: boundary metric degenerate") from exc
        for i in range(n - 1):
            tangent[b, i, others] = vecs[:, i]
    # polish G-orthonormality in long double (one Gram-Schmidt pass)
    for i in range(n - 1):
        t = tangent[:, i, :]
        for j in range(i):
            t = t - np.einsum("bp,bpq,bq->b", t, geo.g, tangent[:, j, :])[:, None] * tangent[:, j, :]
        t = t / np.sqrt(np.einsum("bp,bpq,bq->b", t, geo.g, t))[:, None]
        tangent[:, i, :] = t
    frame = np.concatenate([np.swapaxes(tangent, 1, 2), conormal[:, :, None]], axis=2)
    amb = np.einsum("bi,bia->ba", conormal, geo.D)
    return BoundaryFrame(axis, side, tangent, conormal, frame, amb, geo)


def face_points(surf, axis, side, P_other) -> np.ndarray:
    """Insert the face coordinate into points given on the other axes."""
    P_other = np.asarray(P_other, dtype=DTYPE)
    val = surf.upper[axis] if side == 1 else surf.lower[axis]
    return np.insert(P_other, axis, DTYPE(val), axis=1)
