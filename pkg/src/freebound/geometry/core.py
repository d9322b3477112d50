"""Pointwise differential geometry of parametric hypersurfaces in R^{n+1}.

Conventions used everywhere in the package:

* the unit normal is the normalised generalised cross product of the
  chart tangents ``dF/du_1, ..., dF/du_n`` (in that order), times the
  surface's ``orientation`` (+1 or -1);
* the second fundamental form is ``h_ij = -<d_i d_j F, nu> = <d_i F, d_j nu>``,
  so the unit sphere with its outward normal has ``H = +n``;
* ``|A|^2 = g^{ik} g^{jl} h_ij h_kl``.

Chart derivatives are exact (second-order jets) unless an explicit
finite-difference step ``h`` is passed, in which case fourth-order
differences of chart values are used instead.  Everything is computed in
``numpy.longdouble`` and handed back as float64.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..errors import DegenerateChartError, ZeroGraphQuantityError
from . import jets
from .jets import DTYPE, Jet
from .stencils import CENTRAL, FORWARD, BACKWARD, reach, stencil

DET_FLOOR = 1e-14
CHUNK = 20000


@dataclass(frozen=True, eq=False)
class ParametricHypersurface:
    """A chart ``F: U -> R^{n+1}`` on an axis-aligned box ``U``.

    ``boundary_faces`` lists ``(axis, side)`` pairs (side 0 = lower end,
    1 = upper end) whose image lies on the unit sphere.  ``singular_faces``
    are faces where the chart degenerates (polar axes); sample grids keep
    away from them.
    """

    dim: int
    chart: Callable[[Sequence], Sequence]
    lower: tuple
    upper: tuple
    periodic: tuple
    boundary_faces: tuple = ()
    singular_faces: tuple = ()
    minimal: bool = False
    free_boundary: bool = False
    topology: str = "disk"
    name: str = "surface"
    orientation: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.dim
        if n < 2:
            raise ValueError("dimension must be at least 2")
        if not (len(self.lower) == len(self.upper) == len(self.periodic) == n):
            raise ValueError("parameter box does not match the dimension")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=DTYPE)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=DTYPE)

    def evaluate(self, P) -> np.ndarray:
        """Ambient positions ``(B, n+1)`` for parameter points ``(B, n)``."""
        P = _as_points(P, self.dim)
        cols = [P[:, i] for i in range(self.dim)]
        comps = self.chart(cols)
        out = np.empty((len(P), self.ambient_dim), dtype=DTYPE)
        for k, c in enumerate(comps):
            out[:, k] = c
        return out

    def jet(self, P):
        """Exact ``(F, dF, d2F)`` with shapes ``(B,m)``, ``(B,n,m)``, ``(B,n,n,m)``."""
        P = _as_points(P, self.dim)
        comps = self.chart(Jet.variables(P))
        return jets.stack_chart(comps, len(P))

    def rotated(self, R) -> "ParametricHypersurface":
        """The image under an ambient orthogonal map ``x -> R x``."""
        R = orthonormalize(R)
        base = self.chart
        m = self.ambient_dim

        def chart(u):
            c = base(u)
            return [sum(R[i, j] * c[j] for j in range(m)) for i in range(m)]

        return replace(self, chart=chart, name=self.name + "-rotated")

    def flipped(self) -> "ParametricHypersurface":
        """Same chart with the opposite unit normal."""
        return replace(self, orientation=-self.orientation, name=self.name + "-flipped")

    def in_domain(self, P, tol=1e-12) -> np.ndarray:
        P = _as_points(P, self.dim)
        ok = np.ones(len(P), dtype=bool)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            span = tol * (self.upper[i] - self.lower[i])
            ok &= (P[:, i] >= self.lower[i] - span) & (P[:, i] <= self.upper[i] + span)
        return ok


def orthonormalize(R) -> np.ndarray:
    """Polish a (nearly) orthogonal matrix to long-double orthogonality."""
    R = np.asarray(R, dtype=DTYPE)
    eye = np.eye(R.shape[0], dtype=DTYPE)
    for _ in range(3):
        R = R @ (3 * eye - R.T @ R) / 2
    return R


@dataclass(frozen=True, eq=False)
class KillingField:
    """Ambient Killing field ``V(x) = skew @ x + translation``."""

    skew: np.ndarray
    translation: np.ndarray
    name: str = ""

    def __post_init__(self):
        B = np.asarray(self.skew, dtype=DTYPE)
        b = np.asarray(self.translation, dtype=DTYPE)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or b.shape != (B.shape[0],):
            raise ValueError("skew must be square and match the translation")
        if np.any(B + B.T != 0):
            raise ValueError("skew part is not skew-symmetric")
        object.__setattr__(self, "skew", B)
        object.__setattr__(self, "translation", b)

    @classmethod
    def from_upper(cls, upper, translation, name="") -> "KillingField":
        """Build from the strict upper triangle (row-major) and a translation."""
        t = np.asarray(translation, dtype=DTYPE)
        m = len(t)
        upper = np.asarray(upper, dtype=DTYPE)
        if len(upper) != m * (m - 1) // 2:
            raise ValueError(f"expected {m * (m - 1) // 2} upper-triangle entries")
        B = np.zeros((m, m), dtype=DTYPE)
        B[np.triu_indices(m, 1)] = upper
        return cls(B - B.T, t, name)

    @classmethod
    def translation_field(cls, vector, name="") -> "KillingField":
        v = np.asarray(vector, dtype=DTYPE)
        return cls(np.zeros((len(v), len(v)), dtype=DTYPE), v, name)

    @classmethod
    def rotation(cls, i: int, j: int, dim: int, name="") -> "KillingField":
        """Infinitesimal rotation of the (i, j) coordinate plane, ``e_i -> e_j``."""
        B = np.zeros((dim, dim), dtype=DTYPE)
        B[i, j], B[j, i] = -1, 1
        return cls(B, np.zeros(dim, dtype=DTYPE), name)

    @classmethod
    def basis(cls, dim: int) -> list["KillingField"]:
        """Translations along each axis, then rotations of each coordinate plane."""
        axes = "xyzw"
        fields = []
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = 1
            fields.append(cls.translation_field(e, name="t" + (axes[i] if dim <= 4 else str(i))))
        for i, j in itertools.combinations(range(dim), 2):
            if dim == 3:
                name = "r" + axes[3 - i - j]
            else:
                name = f"r{i}{j}"
            fields.append(cls.rotation(i, j, dim, name=name))
        return fields

    @classmethod
    def named(cls, name: str, dim: int = 3) -> "KillingField":
        for f in cls.basis(dim):
            if f.name == name:
                return f
        raise KeyError(f"unknown Killing field {name!r}")

    @property
    def dim(self) -> int:
        return len(self.translation)

    @property
    def is_translation(self) -> bool:
        return not np.any(self.skew)

    @property
    def is_rotation(self) -> bool:
        return not np.any(self.translation)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        return x @ self.skew.T + self.translation

    def rotated(self, R) -> "KillingField":
        """Conjugate by an ambient rotation: ``x -> R V(R^T x)``."""
        R = orthonormalize(R)
        S = R @ self.skew @ R.T
        S = (S - S.T) / 2
        return KillingField(S, R @ self.translation, self.name)


@dataclass(frozen=True)
class GeometrySample:
    """First and second fundamental data at one point (or a batch).

    ``s_v``, ``v_sq`` and ``q`` are ``None`` when no Killing field was given;
    ``v_sq``/``q`` are ``None`` where ``s_v`` vanishes.
    """

    point: np.ndarray
    metric: np.ndarray
    inverse_metric: np.ndarray
    normal: np.ndarray
    second_form: np.ndarray
    mean_curvature: np.ndarray
    a_norm_sq: np.ndarray
    support: np.ndarray
    s_v: np.ndarray | None = None
    v_sq: np.ndarray | None = None
    q: np.ndarray | None = None


class LocalGeometry:
    """Batched geometric data at parameter points (internal, long double)."""

    def __init__(self, surf, P, F, D, DD, gate=True):
        self.surf = surf
        self.P = P
        self.F = F
        self.D = D
        self.DD = DD
        self.g = np.einsum("bia,bja->bij", D, D)
        self.ginv, self.detg = spd_inverse_det(self.g)
        if gate and np.any(self.detg < DET_FLOOR):
            k = int(np.argmin(self.detg))
            raise DegenerateChartError(
                f"{surf.name}: metric determinant {float(self.detg[k]):.3e} at p={P[k].astype(float)}"
            )
        N = generalized_cross(D) * surf.orientation
        self.normal = N / np.sqrt(np.einsum("ba,ba->b", N, N))[:, None]
        self.h = -np.einsum("bija,ba->bij", DD, self.normal)
        self.H = np.einsum("bij,bij->b", self.ginv, self.h)
        self.shape_op = np.einsum("bik,bkj->bij", self.ginv, self.h)
        self.A2 = np.einsum("bij,bji->b", self.shape_op, self.shape_op)
        self.support = np.einsum("ba,ba->b", self.F, self.normal)

    @property
    def sqrt_detg(self):
        return np.sqrt(self.detg)

    @property
    def christoffel(self):
        """``Gamma[b, k, i, j] = Gamma^k_ij``."""
        # dg[b, k, i, j] = d_k g_ij
        t = np.einsum("bkia,bja->bkij", self.DD, self.D)
        dg = t + np.swapaxes(t, 2, 3)
        # lower[b, l, i, j] = d_i g_lj + d_j g_li - d_l g_ij
        lower = (
            np.einsum("bilj->blij", dg)
            + np.einsum("bjli->blij", dg)
            - dg
        )
        return 0.5 * np.einsum("bkl,blij->bkij", self.ginv, lower)

    def s_v(self, V: KillingField):
        return np.einsum("ba,ba->b", self.normal, V(self.F))


def _as_points(P, n) -> np.ndarray:
    P = np.asarray(P, dtype=DTYPE)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[-1] != n:
        raise ValueError(f"expected parameter points with {n} coordinates")
    return P


def spd_inverse_det(g):
    """Inverse and determinant of a batch of small SPD matrices (Cholesky).

    Works in any float dtype, including long double where ``numpy.linalg``
    is unavailable.  Non-positive pivots give a zero determinant.
    """
    b, n, _ = g.shape
    L = np.zeros_like(g)
    ok = np.ones(b, dtype=bool)
    for j in range(n):
        s = g[:, j, j] - np.einsum("bk,bk->b", L[:, j, :j], L[:, j, :j])
        ok &= s > 0
        d = np.sqrt(np.where(s > 0, s, 1))
        L[:, j, j] = d
        for i in range(j + 1, n):
            L[:, i, j] = (g[:, i, j] - np.einsum("bk,bk->b", L[:, i, :j], L[:, j, :j])) / d
    det = np.prod(np.diagonal(L, axis1=1, axis2=2), axis=1) ** 2
    det = np.where(ok, det, 0)
    # invert L by forward substitution, then ginv = L^-T L^-1
    Li = np.zeros_like(g)
    for i in range(n):
        Li[:, i, i] = 1 / L[:, i, i]
        for j in range(i):
            Li[:, i, j] = -np.einsum("bk,bk->b", L[:, i, j:i], Li[:, j:i, j]) / L[:, i, i]
    ginv = np.einsum("bki,bkj->bij", Li, Li)
    return ginv, det


_PERM_CACHE: dict = {}


def _permutations(n):
    if n not in _PERM_CACHE:
        perms = []
        for p in itertools.permutations(range(n)):
            inv = sum(1 for a, b in itertools.combinations(p, 2) if a > b)
            perms.append((p, -1 if inv % 2 else 1))
        _PERM_CACHE[n] = perms
    return _PERM_CACHE[n]


def small_det(M):
    """Leibniz determinant of a batch of small square matrices."""
    n = M.shape[-1]
    out = np.zeros(M.shape[:-2], dtype=M.dtype)
    for p, sgn in _permutations(n):
        term = np.ones(M.shape[:-2], dtype=M.dtype)
        for r in range(n):
            term = term * M[..., r, p[r]]
        out = out + sgn * term
    return out


def generalized_cross(D):
    """Normal vector ``N`` with ``<N, v> = det[D; v]`` for tangents ``D (B, n, n+1)``."""
    b, n, m = D.shape
    N = np.empty((b, m), dtype=D.dtype)
    cols = list(range(m))
    for k in range(m):
        minor = D[:, :, [c for c in cols if c != k]]
        N[:, k] = (-1) ** (n + k) * small_det(minor)
    return N


def _axis_sides(surf, P, h, rch_c, rch_s):
    """Per point, per axis: central, forward or backward stencil."""
    sides = np.zeros(P.shape, dtype=int)
    for i in range(surf.dim):
        if surf.periodic[i]:
            continue
        lo, hi = surf.lower[i], surf.upper[i]
        eps = 1e-12 * (hi - lo)
        need_fwd = P[:, i] - rch_c * h < lo - eps
        need_bwd = P[:, i] + rch_c * h > hi + eps
        if np.any(need_fwd & need_bwd):
            raise ValueError("finite-difference step too large for the parameter box")
        sides[need_fwd, i] = FORWARD
        sides[need_bwd, i] = BACKWARD
    return sides


def fd_derivatives(func, P, h, *, order=2, domain=None, one_sided=True, second=True):
    """Value, first and second parameter derivatives of ``func`` by finite differences.

    ``func`` maps points ``(B, n)`` to arrays ``(B, ...)``.  Central stencils
    of the requested accuracy order are used; where ``domain`` (a surface)
    says the central stencil leaves a non-periodic parameter interval,
    one-sided stencils of the same order are substituted if ``one_sided``
    is true, otherwise :class:`StencilOutOfDomainError` is raised.
    Mixed derivatives are products of first-derivative stencils.
    """
    from ..errors import StencilOutOfDomainError

    P = np.asarray(P, dtype=DTYPE)
    B, n = P.shape
    h = DTYPE(h)
    if domain is not None:
        sides = _axis_sides(domain, P, h, reach(order, CENTRAL), reach(order, FORWARD))
        if not one_sided and np.any(sides != CENTRAL):
            bad = np.nonzero(np.any(sides != CENTRAL, axis=1))[0]
            raise StencilOutOfDomainError(
                f"stencil leaves the parameter domain at {len(bad)} point(s), "
                f"first p={P[bad[0]].astype(float)}"
            )
    else:
        sides = np.zeros(P.shape, dtype=int)

    f0 = None
    d1 = d2 = None
    keys, inverse = np.unique(sides, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for gi, key in enumerate(keys):
        idx = np.nonzero(inverse == gi)[0]
        offsets = {(0,) * n: None}
        s1 = [stencil(1, order, int(key[i])) for i in range(n)]
        s2 = [stencil(2, order, int(key[i])) for i in range(n)]
        terms = []  # (target, offset, weight, power of h)
        for i in range(n):
            for o, w in zip(*s1[i]):
                off = [0] * n
                off[i] = o
                terms.append((("d1", i), tuple(off), w, 1))
            if second:
                for o, w in zip(*s2[i]):
                    off = [0] * n
                    off[i] = o
                    terms.append((("d2", i, i), tuple(off), w, 2))
                for j in range(i + 1, n):
                    for oi, wi in zip(*s1[i]):
                        for oj, wj in zip(*s1[j]):
                            off = [0] * n
                            off[i], off[j] = oi, oj
                            terms.append((("d2", i, j), tuple(off), wi * wj, 2))
        for _, off, _, _ in terms:
            offsets[off] = None
        offlist = list(offsets)
        where = {o: k for k, o in enumerate(offlist)}
        O = np.asarray(offlist, dtype=DTYPE)
        Pg = P[idx]
        pts = (Pg[None, :, :] + h * O[:, None, :]).reshape(-1, n)
        vals = _chunked(func, pts)
        vals = vals.reshape((len(offlist), len(idx)) + vals.shape[1:])
        if f0 is None:
            tail = vals.shape[2:]
            f0 = np.zeros((B,) + tail, dtype=vals.dtype)
            d1 = np.zeros((B, n) + tail, dtype=vals.dtype)
            if second:
                d2 = np.zeros((B, n, n) + tail, dtype=vals.dtype)
        f0[idx] = vals[where[(0,) * n]]
        for target, off, w, pw in terms:
            contrib = w * vals[where[off]] / h**pw
            if target[0] == "d1":
                d1[idx, target[1]] += contrib
            else:
                _, i, j = target
                d2[idx, i, j] += contrib
                if i != j:
                    d2[idx, j, i] += contrib
    return f0, d1, d2


def _chunked(func, pts):
    if len(pts) <= CHUNK:
        return np.asarray(func(pts))
    parts = [np.asarray(func(pts[k : k + CHUNK])) for k in range(0, len(pts), CHUNK)]
    return np.concatenate(parts, axis=0)


def local_geometry(surf: ParametricHypersurface, P, h=None, gate=True) -> LocalGeometry:
    """Geometry at a batch of points; exact jets unless an FD step ``h`` is given.

    ``gate=False`` skips the immersion test, for quadrature nodes that may
    approach a polar singularity where only ``sqrt(det g)`` is needed.
    """
    P = _as_points(P, surf.dim)
    if h is None:
        if len(P) > CHUNK:
            parts = [surf.jet(P[k : k + CHUNK]) for k in range(0, len(P), CHUNK)]
            F, D, DD = (np.concatenate([p[i] for p in parts]) for i in range(3))
        else:
            F, D, DD = surf.jet(P)
    else:
        F, D, DD = fd_derivatives(surf.evaluate, P, h, order=4, domain=surf)
    return LocalGeometry(surf, P, F, D, DD, gate)


def _single(x, single):
    x = np.asarray(x, dtype=np.float64)
    return x[0] if single else x


def _is_single(p):
    return np.ndim(p) == 1


def metric_at(surf, p, h=None) -> np.ndarray:
    """Induced metric ``g_ij = <d_i F, d_j F>``."""
    geo = local_geometry(surf, p, h)
    return _single(geo.g, _is_single(p))


def unit_normal(surf, p, h=None) -> np.ndarray:
    """Unit normal by the orientation rule in the module docstring."""
    geo = local_geometry(surf, p, h)
    return _single(geo.normal, _is_single(p))


def sample(surf, p, V: KillingField | None = None, h=None, zero_tol=1e-10) -> GeometrySample:
    """Full :class:`GeometrySample`; Killing quantities filled when ``V`` is given."""
    geo = local_geometry(surf, p, h)
    one = _is_single(p)
    s_v = v_sq = q = None
    if V is not None:
        sv = geo.s_v(V)
        nz = np.abs(sv) > zero_tol
        with np.errstate(divide="ignore", invalid="ignore"):
            vs = np.where(nz, 1 / sv**2, np.nan)
        s_v = _single(sv, one)
        if np.all(nz):
            v_sq = _single(vs, one)
            q = _single(geo.support**2 * vs, one)
        elif not one:
            v_sq = _single(vs, one)
            q = _single(geo.support**2 * vs, one)
    return GeometrySample(
        point=_single(geo.F, one),
        metric=_single(geo.g, one),
        inverse_metric=_single(geo.ginv, one),
        normal=_single(geo.normal, one),
        second_form=_single(geo.h, one),
        mean_curvature=_single(geo.H, one),
        a_norm_sq=_single(geo.A2, one),
        support=_single(geo.support, one),
        s_v=s_v,
        v_sq=v_sq,
        q=q,
    )


def shape_operator(surf, p, h=None) -> GeometrySample:
    """Second fundamental form, mean curvature and ``|A|^2`` at ``p``."""
    return sample(surf, p, None, h)


def graph_quantity(surf, V: KillingField, p, h=None):
    """``s_V = <nu, V(F)>``."""
    geo = local_geometry(surf, p, h)
    return _single(geo.s_v(V), _is_single(p))


def support_function(surf, p, h=None):
    """``u = <F, nu>``."""
    geo = local_geometry(surf, p, h)
    return _single(geo.support, _is_single(p))


def q_quantity(surf, V: KillingField, p, h=None, zero_tol=1e-10):
    """``Q = u^2 / s_V^2``; refuses points where ``|s_V| <= zero_tol``."""
    geo = local_geometry(surf, p, h)
    sv = geo.s_v(V)
    bad = np.abs(sv) <= zero_tol
    if np.any(bad):
        pts = np.asarray(geo.P[bad], dtype=float)
        raise ZeroGraphQuantityError(
            f"|s_V| <= {zero_tol:g} at {len(pts)} point(s); Killing-graphical hypothesis fails",
            points=pts,
        )
    return _single(geo.support**2 / sv**2, _is_single(p))
