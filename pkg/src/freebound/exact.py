"""Exact free-boundary minimal hypersurfaces and a non-minimal control.

* :func:`equatorial_disk` - the flat unit n-disk.
* :func:`critical_catenoid` - the rotational minimal annulus in the unit
  3-ball meeting the sphere orthogonally.
* :func:`rotational_minimal` - its analogue in higher dimension, found by
  shooting on the waist radius of the minimal hypersurface of revolution.
* :func:`spherical_cap` - a cap of the unit sphere (constant ``H = n``),
  used to confirm that minimality-dependent checks fail when they should.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import ShootingNoBracketError
from .geometry import jets
from .geometry.core import DTYPE, ParametricHypersurface, local_geometry
from .geometry.jets import Jet

MARGIN = 1e-3  # distance kept from degenerate chart faces


def sphere_coords(angles):
    """Unit vector in R^{k+1} from ``k`` hyperspherical angles.

    The last angle is the periodic azimuth; the others range over ``[0, pi]``.
    """
    k = len(angles)
    out = []
    prod = 1
    for i in range(k - 1):
        out.append(prod * jets.cos(angles[i]))
        prod = prod * jets.sin(angles[i])
    out.append(prod * jets.cos(angles[-1]))
    out.append(prod * jets.sin(angles[-1]))
    return out


def _angle_box(k):
    lower = [0.0] * k
    upper = [np.pi] * (k - 1) + [2 * np.pi]
    periodic = [False] * (k - 1) + [True]
    return lower, upper, periodic


def _orient(surf: ParametricHypersurface, p_ref, target) -> ParametricHypersurface:
    """Choose the orientation whose normal at ``p_ref`` has positive overlap with ``target``."""
    geo = local_geometry(surf, np.asarray(p_ref, dtype=DTYPE)[None, :])
    if float(np.dot(np.asarray(geo.normal[0], dtype=float), target)) < 0:
        from dataclasses import replace

        surf = replace(surf, orientation=-surf.orientation)
    return surf


# ---------------------------------------------------------------- disk


def equatorial_disk(n: int = 2) -> ParametricHypersurface:
    """Flat unit n-disk in ``x_{n+1} = 0``; parameters ``(r, angles...)``.

    The normal is ``+e_{n+1}``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")

    def chart(u):
        r, angles = u[0], u[1:]
        omega = sphere_coords(angles)
        return [r * w for w in omega] + [0.0]

    alo, ahi, aper = _angle_box(n - 1)
    singular = [(0, 0)] + [(i, s) for i in range(1, n - 1) for s in (0, 1)]
    surf = ParametricHypersurface(
        dim=n,
        chart=chart,
        lower=tuple([0.0] + alo),
        upper=tuple([1.0] + ahi),
        periodic=tuple([False] + aper),
        boundary_faces=((0, 1),),
        singular_faces=tuple(singular),
        minimal=True,
        free_boundary=True,
        topology="disk",
        name=f"disk{n}",
        params={"n": n},
    )
    ref = [0.5] + [np.pi / 2] * (n - 2) + [0.3]
    e = np.zeros(n + 1)
    e[-1] = 1
    return _orient(surf, ref, e)


# ---------------------------------------------------------------- catenoid


@dataclass(frozen=True)
class CatenoidParameters:
    """``s0`` solves ``s tanh s = 1``; ``c`` puts the boundary circles on the unit sphere."""

    s0: float
    c: float
    n: int = 2
    bisection_s0: float = float("nan")
    newton_steps: int = 0

    def root_residual(self) -> float:
        s = np.longdouble(self.s0)
        return float(s * np.tanh(s) - 1)

    def sphere_residual(self) -> float:
        s, c = np.longdouble(self.s0), np.longdouble(self.c)
        return float(c * c * np.cosh(s) ** 2 + c * c * s * s - 1)


def _catenoid_root_fn(s):
    return s * np.tanh(s) - 1


def critical_catenoid_parameters(bracket=(1.0, 1.5), bisect_tol=1e-6) -> CatenoidParameters:
    """Bisection on ``s tanh s - 1`` over ``bracket``, then Newton polish in long double."""
    lo, hi = (np.longdouble(b) for b in bracket)
    flo, fhi = _catenoid_root_fn(lo), _catenoid_root_fn(hi)
    if not (flo < 0 < fhi):
        raise ValueError(f"bracket {bracket} does not straddle the root")
    while hi - lo > bisect_tol:
        mid = (lo + hi) / 2
        if _catenoid_root_fn(mid) < 0:
            lo = mid
        else:
            hi = mid
    s_bis = (lo + hi) / 2
    s = s_bis
    steps = 0
    for steps in range(1, 30):
        f = _catenoid_root_fn(s)
        fp = np.tanh(s) + s / np.cosh(s) ** 2
        step = f / fp
        s = s - step
        if abs(step) < 1e-18:
            break
    c = 1 / np.sqrt(np.cosh(s) ** 2 + s * s)
    return CatenoidParameters(float(s), float(c), 2, float(s_bis), steps)


def critical_catenoid(params: CatenoidParameters | None = None) -> ParametricHypersurface:
    """Chart ``(theta, s) -> (c cosh s cos theta, c cosh s sin theta, c s)``, ``|s| <= s0``."""
    p = params or critical_catenoid_parameters()
    c = DTYPE(p.c)

    def chart(u):
        th, s = u
        rho = c * jets.cosh(s)
        return [rho * jets.cos(th), rho * jets.sin(th), c * s]

    surf = ParametricHypersurface(
        dim=2,
        chart=chart,
        lower=(0.0, -p.s0),
        upper=(2 * np.pi, p.s0),
        periodic=(True, False),
        boundary_faces=((1, 0), (1, 1)),
        minimal=True,
        free_boundary=True,
        topology="annulus",
        name="catenoid",
        params={"s0": p.s0, "c": p.c},
    )
    return _orient(surf, [0.0, 0.0], np.array([1.0, 0.0, 0.0]))


# ---------------------------------------------------------------- rotational


@dataclass
class ProfileCurve:
    """Sampled profile ``(r, z, r')`` of a minimal hypersurface of revolution.

    Nodes are along arclength ``sigma``; ``r`` and ``z`` are interpolated by
    C^2 cubic splines.
    """

    n: int
    sigma: np.ndarray
    r: np.ndarray
    z: np.ndarray
    slope: np.ndarray
    waist: float
    r_spline: CubicSpline = field(init=False, repr=False)
    z_spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self.r_spline = CubicSpline(self.sigma, self.r)
        self.z_spline = CubicSpline(self.sigma, self.z)

    def ode_residual(self, sigma=None) -> np.ndarray:
        """``r'' - (n-1)(1 + r'^2)/r`` with z-derivatives taken from the splines."""
        s = self.sigma[1:-1] if sigma is None else np.asarray(sigma)
        rs, rss = self.r_spline(s, 1), self.r_spline(s, 2)
        zs, zss = self.z_spline(s, 1), self.z_spline(s, 2)
        r = self.r_spline(s)
        rz = rs / zs
        rzz = (rss * zs - rs * zss) / zs**3
        return rzz - (self.n - 1) * (1 + rz**2) / r

    def first_integral_residual(self) -> np.ndarray:
        """``r^{n-1}/sqrt(1 + r'^2) - a^{n-1}``, conserved along exact solutions."""
        return self.r ** (self.n - 1) / np.sqrt(1 + self.slope**2) - self.waist ** (self.n - 1)

    def endpoint_radius(self) -> float:
        return float(np.hypot(self.r[-1], self.z[-1]))


@dataclass
class ShootingResult:
    n: int
    waist: float
    z_end: float
    sigma_end: float
    functional: float
    profile: ProfileCurve
    scan: list


def _profile_rhs(n):
    def rhs(sig, y):
        r, z, beta = y
        return [np.sin(beta), np.cos(beta), (n - 1) * np.cos(beta) / r]

    return rhs


def _sphere_event(sig, y):
    return y[0] ** 2 + y[1] ** 2 - 1


_sphere_event.terminal = True
_sphere_event.direction = 1


def _integrate_profile(n, a, dense=False, rtol=1e-12, atol=1e-14):
    sol = solve_ivp(
        _profile_rhs(n),
        (0.0, 20.0),
        [a, 0.0, 0.0],
        method="DOP853",
        events=_sphere_event,
        rtol=rtol,
        atol=atol,
        dense_output=dense,
    )
    if not sol.t_events[0].size:
        return None
    return sol


def orthogonality_functional(n: int, a: float) -> float:
    """``u = <F, nu>`` where the profile from waist ``a`` first meets the unit sphere."""
    sol = _integrate_profile(n, a)
    if sol is None:
        return float("nan")
    r, z, beta = sol.y_events[0][0]
    return float(r * np.cos(beta) - z * np.sin(beta))


def shoot_rotational(n: int, a_range=(0.02, 0.995), scan_points=40, tol=1e-11) -> ShootingResult:
    """Find the waist radius whose profile meets the unit sphere orthogonally.

    Scans ``a_range`` for the first sign change of the orthogonality
    functional, then bisects to ``tol`` in ``a``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    grid = np.linspace(a_range[0], a_range[1], scan_points)
    scan = [(float(a), orthogonality_functional(n, a)) for a in grid]
    bracket = None
    for (a0, g0), (a1, g1) in zip(scan, scan[1:]):
        if np.isfinite(g0) and np.isfinite(g1) and g0 * g1 < 0:
            bracket = (a0, g0, a1, g1)
            break
    if bracket is None:
        raise ShootingNoBracketError(f"no sign change of u over waist radii {a_range} (n={n})", scan=scan)
    lo, glo, hi, _ = bracket
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = orthogonality_functional(n, mid)
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    sol = _integrate_profile(n, a, dense=True)
    sig_end = float(sol.t_events[0][0])
    sig = np.linspace(0.0, sig_end, 2001)
    r, z, beta = sol.sol(sig)
    r_e, z_e, b_e = sol.y_events[0][0]
    r[-1], z[-1], beta[-1] = r_e, z_e, b_e
    prof = ProfileCurve(n, sig, r, z, np.tan(beta), a)
    g = float(r_e * np.cos(b_e) - z_e * np.sin(b_e))
    return ShootingResult(n, a, float(z_e), sig_end, g, prof, scan)


_GL_X, _GL_W = (np.asarray(v, dtype=DTYPE) for v in np.polynomial.legendre.leggauss(48))


def _height_integral(w, p):
    """``int_0^w cosh(t)^(-p) dt`` by fixed 48-point Gauss-Legendre (smooth in ``w``)."""
    w = np.asarray(w, dtype=DTYPE)
    t = (w[..., None] / 2) * (_GL_X + 1)
    return (w / 2) * np.sum(_GL_W * np.cosh(t) ** (-p), axis=-1)


def _profile_height(w, a, n):
    """Jet-aware ``z(w) = a/(n-1) int_0^w cosh^{-(n-2)/(n-1)}``."""
    p = DTYPE(n - 2) / DTYPE(n - 1)
    k = DTYPE(a) / DTYPE(n - 1)
    if n == 2:
        return k * w
    if isinstance(w, Jet):
        v = w.v
        ch = np.cosh(v)
        f1 = ch ** (-p)
        f2 = -p * ch ** (-p - 1) * np.sinh(v)
        return w.chain(k * _height_integral(v, p), k * f1, k * f2)
    return k * _height_integral(w, p)


def _profile_radius(w, a, n):
    return DTYPE(a) * jets.power(jets.cosh(w), DTYPE(1) / DTYPE(n - 1))


def rotational_chart_end(n: int, a: float) -> float:
    """Profile parameter ``w0 > 0`` where the closed-form profile meets the unit sphere."""

    def excess(w):
        r = float(_profile_radius(np.asarray([w], dtype=DTYPE), a, n)[0])
        z = float(_profile_height(np.asarray([w], dtype=DTYPE), a, n)[0])
        return r * r + z * z - 1

    hi = 0.5
    while excess(hi) < 0:
        hi *= 2
        if hi > 1e3:
            raise ValueError("profile never reaches the unit sphere")
    w = brentq(excess, 0.0, hi, xtol=1e-16, rtol=1e-15)
    return float(w)


def rotational_minimal(n: int = 3, shooting: ShootingResult | None = None) -> ParametricHypersurface:
    """Minimal hypersurface of revolution in the unit (n+1)-ball with free boundary.

    The waist radius ``a`` comes from ODE shooting (:func:`shoot_rotational`).
    The chart uses the first integral ``r^{n-1} cos(beta) = a^{n-1}``:
    ``r = a cosh(w)^{1/(n-1)}``, ``z = a/(n-1) int_0^w cosh^{-(n-2)/(n-1)}``,
    which is analytic in ``w``; parameters are ``(angles on S^{n-1}..., w)``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    shot = shooting or shoot_rotational(n)
    a = shot.waist
    w0 = rotational_chart_end(n, a)

    def chart(u):
        angles, w = u[:-1], u[-1]
        r = _profile_radius(w, a, n)
        omega = sphere_coords(angles)
        return [r * o for o in omega] + [_profile_height(w, a, n)]

    alo, ahi, aper = _angle_box(n - 1)
    singular = [(i, s) for i in range(n - 2) for s in (0, 1)]
    surf = ParametricHypersurface(
        dim=n,
        chart=chart,
        lower=tuple(alo + [-w0]),
        upper=tuple(ahi + [w0]),
        periodic=tuple(aper + [False]),
        boundary_faces=((n - 1, 0), (n - 1, 1)),
        singular_faces=tuple(singular),
        minimal=True,
        free_boundary=True,
        topology="annulus",
        name=f"rotational{n}",
        params={"n": n, "waist": a, "w0": w0, "z_end": shot.z_end},
    )
    ref = [np.pi / 2] * (n - 2) + [0.0, 0.0]
    e = np.zeros(n + 1)
    e[0] = 1
    return _orient(surf, ref, e)


# ---------------------------------------------------------------- cap


def spherical_cap(height: float = 0.5, n: int = 2) -> ParametricHypersurface:
    """The cap ``{x in S^n : x_{n+1} >= 1 - height}`` with outward normal (``H = n``)."""
    if not 0 < height < 2:
        raise ValueError("height must lie in (0, 2)")
    alpha0 = float(np.arccos(1 - height))

    def chart(u):
        alpha, angles = u[0], u[1:]
        s = jets.sin(alpha)
        return [s * o for o in sphere_coords(angles)] + [jets.cos(alpha)]

    alo, ahi, aper = _angle_box(n - 1)
    singular = [(0, 0)] + [(i, s) for i in range(1, n - 1) for s in (0, 1)]
    surf = ParametricHypersurface(
        dim=n,
        chart=chart,
        lower=tuple([0.0] + alo),
        upper=tuple([alpha0] + ahi),
        periodic=tuple([False] + aper),
        boundary_faces=((0, 1),),
        singular_faces=tuple(singular),
        minimal=False,
        free_boundary=False,
        topology="disk",
        name=f"cap{n}",
        params={"height": height, "n": n},
    )
    ref = [alpha0 / 2] + [np.pi / 2] * (n - 2) + [0.0]
    p = np.asarray(ref, dtype=DTYPE)[None, :]
    return _orient(surf, ref, np.asarray(surf.evaluate(p)[0], dtype=float))


# ---------------------------------------------------------------- factory and export


def surface_by_name(name: str, **kw) -> ParametricHypersurface:
    """Construct ``disk``, ``catenoid``, ``rotational`` or ``cap`` from keyword parameters."""
    if name == "disk":
        return equatorial_disk(int(kw.get("n", 2)))
    if name == "catenoid":
        return critical_catenoid()
    if name == "rotational":
        return rotational_minimal(int(kw.get("n", 3)))
    if name == "cap":
        return spherical_cap(float(kw.get("height", 0.5)), int(kw.get("n", 2)))
    raise KeyError(f"unknown surface {name!r}")


def parameter_grid(surf: ParametricHypersurface, counts, include_ends=True) -> np.ndarray:
    """Regular grid over the parameter box, away from singular faces by ``MARGIN``."""
    counts = [counts] * surf.dim if np.isscalar(counts) else list(counts)
    axes = []
    for i, k in enumerate(counts):
        lo, hi = surf.lower[i], surf.upper[i]
        if surf.periodic[i]:
            axes.append(np.linspace(lo, hi, k, endpoint=False))
            continue
        if (i, 0) in surf.singular_faces:
            lo = lo + MARGIN
        if (i, 1) in surf.singular_faces:
            hi = hi - MARGIN
        axes.append(np.linspace(lo, hi, k) if include_ends else np.linspace(lo, hi, k + 2)[1:-1])
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1), [len(a) for a in axes]


def export_grid_csv(surf: ParametricHypersurface, counts, path) -> Path:
    """Write parameter/ambient coordinates of a sample grid as CSV."""
    P, _ = parameter_grid(surf, counts)
    X = np.asarray(surf.evaluate(P), dtype=float)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"u{i + 1}" for i in range(surf.dim)] + [f"x{i + 1}" for i in range(surf.ambient_dim)])
        for p, x in zip(P, X):
            w.writerow([f"{v:.17g}" for v in p] + [f"{v:.17g}" for v in x])
    return path


def export_obj(surf: ParametricHypersurface, counts, path) -> Path:
    """Triangulate a 2-dimensional chart on a regular grid and write OBJ."""
    if surf.dim != 2:
        raise ValueError("OBJ export needs a 2-dimensional surface")
    P, shape = parameter_grid(surf, counts)
    X = np.asarray(surf.evaluate(P), dtype=float)
    n0, n1 = shape
    idx = np.arange(n0 * n1).reshape(n0, n1)
    tris = []
    i_range = range(n0) if surf.periodic[0] else range(n0 - 1)
    j_range = range(n1) if surf.periodic[1] else range(n1 - 1)
    for i in i_range:
        for j in j_range:
            a, b = idx[i, j], idx[(i + 1) % n0, j]
            c, d = idx[(i + 1) % n0, (j + 1) % n1], idx[i, (j + 1) % n1]
            tris.append((a, b, c))
            tris.append((a, c, d))
    path = Path(path)
    with path.open("w") as fh:
        for x in X:
            fh.write("v {:.17g} {:.17g} {:.17g}\n".format(*x))
        for t in tris:
            fh.write("f {} {} {}\n".format(*(k + 1 for k in t)))
    return path
