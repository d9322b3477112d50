"""Geometry core: jets, stencils, charts, curvature, operators, quadrature.

Reference values come from closed forms or from mpmath, never from the
code under test.
"""

from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebound.errors import DegenerateChartError, QuadratureNonConvergence, ZeroGraphQuantityError
from freebound.geometry import jets
from freebound.geometry.core import (
    KillingField,
    graph_quantity,
    local_geometry,
    metric_at,
    orthonormalize,
    q_quantity,
    sample,
    shape_operator,
    support_function,
    unit_normal,
)
from freebound.geometry.jets import Jet
from freebound.geometry.operators import laplace_beltrami, nabla_A_norm_sq, surface_gradient
from freebound.geometry.quadrature import (
    QuadratureRule,
    boundary_volume,
    certified,
    integrate_surface,
    surface_area,
)
from freebound.geometry.stencils import fornberg_weights, reach, stencil

# ---------------------------------------------------------------- jets


def test_jet_derivatives_match_mpmath():
    p = np.array([[0.3, -0.7]])
    x, y = Jet.variables(p)
    f = jets.sin(x) * jets.exp(y) / (1 + x * x) + jets.sqrt(2 + y * y) * jets.cosh(x - y)
    v = np.asarray(f.v, dtype=float)[0]
    d = np.asarray(f.d, dtype=float)[0]
    dd = np.asarray(f.dd, dtype=float)[0]

    def g(a, b):
        return mpmath.sin(a) * mpmath.exp(b) / (1 + a * a) + mpmath.sqrt(2 + b * b) * mpmath.cosh(a - b)

    a, b = mpmath.mpf("0.3"), mpmath.mpf("-0.7")
    assert v == pytest.approx(float(g(a, b)), rel=1e-15)
    assert d[0] == pytest.approx(float(mpmath.diff(g, (a, b), (1, 0))), rel=1e-14)
    assert d[1] == pytest.approx(float(mpmath.diff(g, (a, b), (0, 1))), rel=1e-14)
    assert dd[0, 0] == pytest.approx(float(mpmath.diff(g, (a, b), (2, 0))), rel=1e-13)
    assert dd[0, 1] == pytest.approx(float(mpmath.diff(g, (a, b), (1, 1))), rel=1e-13)
    assert dd[1, 0] == pytest.approx(dd[0, 1], rel=1e-15)
    assert dd[1, 1] == pytest.approx(float(mpmath.diff(g, (a, b), (0, 2))), rel=1e-13)


def test_jet_power_and_reciprocal():
    (x,) = Jet.variables(np.array([[1.7]]))
    f = jets.power(x, 1.5) - 3 / x
    d = float(np.asarray(f.d)[0, 0])
    dd = float(np.asarray(f.dd)[0, 0, 0])
    assert d == pytest.approx(1.5 * 1.7**0.5 + 3 / 1.7**2, rel=1e-15)
    assert dd == pytest.approx(0.75 * 1.7**-0.5 - 6 / 1.7**3, rel=1e-14)


# ---------------------------------------------------------------- stencils


def test_fornberg_known_stencils():
    assert fornberg_weights((-1, 0, 1), 2) == (1, -2, 1)
    assert fornberg_weights((-1, 0, 1), 1) == (Fraction(-1, 2), 0, Fraction(1, 2))
    assert fornberg_weights((-2, -1, 0, 1, 2), 2) == (
        Fraction(-1, 12), Fraction(4, 3), Fraction(-5, 2), Fraction(4, 3), Fraction(-1, 12)
    )
    assert fornberg_weights((0, 1, 2), 1) == (Fraction(-3, 2), 2, Fraction(-1, 2))


@pytest.mark.parametrize("deriv", [1, 2])
@pytest.mark.parametrize("order", [2, 4, 6])
@pytest.mark.parametrize("side", [0, 1, -1])
def test_stencils_exact_on_polynomials(deriv, order, side):
    offs, w = stencil(deriv, order, side)
    # exact for all monomials of degree < deriv + order
    for k in range(deriv + order):
        terms = [float(wi) * float(o) ** k for o, wi in zip(offs, w)]
        exact = float(np.prod(range(k - deriv + 1, k + 1))) if k == deriv else 0.0
        scale = sum(abs(t) for t in terms) + 1
        assert sum(terms) == pytest.approx(exact, abs=1e-14 * scale)
    if side == 1:
        assert offs.min() >= 0
    if side == -1:
        assert offs.max() <= 0


def test_stencil_reach():
    assert reach(2) == 1
    assert reach(4) == 2
    assert reach(4, 1) == 5


def test_fornberg_rejects_short_stencil():
    with pytest.raises(ValueError):
        fornberg_weights((0, 1), 2)


# ---------------------------------------------------------------- metric and normal


def test_disk_metric_polar(disk2):
    g = metric_at(disk2, [0.5, 0.0])
    assert np.allclose(np.asarray(g, dtype=float), np.diag([1.0, 0.25]), atol=1e-15)


def test_catenoid_metric_conformal(catenoid, cat_params):
    c = cat_params.c
    for s in (0.0, 0.4, -1.0):
        g = np.asarray(metric_at(catenoid, [1.1, s]), dtype=float)
        assert np.allclose(g, c**2 * np.cosh(s) ** 2 * np.eye(2), rtol=1e-14, atol=1e-16)


def test_fd_metric_agrees_with_jets(catenoid):
    p = [0.7, 0.3]
    exact = np.asarray(metric_at(catenoid, p), dtype=float)
    errs = [np.abs(np.asarray(metric_at(catenoid, p, h=h), dtype=float) - exact).max() for h in (1e-2, 5e-3)]
    assert errs[0] < 1e-8
    # fourth-order stencils: halving h divides the error by about 16
    assert errs[1] < errs[0] / 8


def test_normals(disk2, catenoid, cat_params):
    assert np.allclose(np.asarray(unit_normal(disk2, [0.3, 1.0]), dtype=float), [0, 0, 1])
    P = np.array([[0.0, 0.0], [np.pi / 2, 0.5], [2.0, -0.8]])
    N = np.asarray(unit_normal(catenoid, P), dtype=float)
    th, s = P[:, 0], P[:, 1]
    ref = np.column_stack([np.cos(th), np.sin(th), -np.sinh(s)]) / np.cosh(s)[:, None]
    assert np.allclose(N, ref, atol=1e-15)
    geo = local_geometry(catenoid, P)
    D = np.asarray(geo.D, dtype=float)
    assert np.abs(np.einsum("bia,ba->bi", D, N)).max() < 1e-15


def test_degenerate_chart_detected(disk2):
    with pytest.raises(DegenerateChartError):
        metric_at(disk2, [0.0, 0.3])


# ---------------------------------------------------------------- curvature


def test_catenoid_curvature_closed_form(catenoid, cat_params):
    c, s0 = cat_params.c, cat_params.s0
    th = np.linspace(0, 2 * np.pi, 9)
    s = np.linspace(-s0, s0, 11)
    P = np.stack(np.meshgrid(th, s, indexing="ij"), axis=-1).reshape(-1, 2)
    g = sample(catenoid, P)
    S = P[:, 1]
    assert np.abs(np.asarray(g.mean_curvature, dtype=float)).max() < 1e-14
    assert np.allclose(np.asarray(g.a_norm_sq, dtype=float), 2 / (c**2 * np.cosh(S) ** 4), rtol=1e-13)
    u = c * (1 - S * np.tanh(S))
    assert np.allclose(np.asarray(g.support, dtype=float), u, atol=1e-15)


def test_disk_is_flat(disk2, disk3):
    for surf, p in ((disk2, [0.4, 2.0]), (disk3, [0.6, 1.0, 0.5])):
        g = shape_operator(surf, p)
        assert float(g.a_norm_sq) == 0
        assert float(g.mean_curvature) == 0
        assert float(g.support) == 0


def test_sphere_cap_umbilic(cap):
    g = shape_operator(cap, [0.4, 1.3])
    assert float(g.mean_curvature) == pytest.approx(2.0, rel=1e-14)
    assert float(g.a_norm_sq) == pytest.approx(2.0, rel=1e-14)
    assert float(g.support) == pytest.approx(1.0, rel=1e-15)


def test_flipped_orientation(catenoid):
    p = np.array([[0.3, 0.2], [1.0, -0.5]])
    a, b = sample(catenoid, p), sample(catenoid.flipped(), p)
    assert np.allclose(np.asarray(a.normal, dtype=float), -np.asarray(b.normal, dtype=float))
    assert np.allclose(np.asarray(a.second_form, dtype=float), -np.asarray(b.second_form, dtype=float))
    assert np.allclose(np.asarray(a.a_norm_sq, dtype=float), np.asarray(b.a_norm_sq, dtype=float))


# ---------------------------------------------------------------- Killing fields


def test_killing_basis_names_and_skew():
    B = KillingField.basis(3)
    assert [f.name for f in B] == ["tx", "ty", "tz", "rz", "ry", "rx"]
    for f in B:
        assert np.all(f.skew + f.skew.T == 0)
    rz = KillingField.named("rz")
    assert np.allclose(np.asarray(rz(np.array([[1.0, 0, 0]])), dtype=float), [[0, 1, 0]])
    assert len(KillingField.basis(4)) == 4 + 6
    with pytest.raises(KeyError):
        KillingField.named("qq")


def test_killing_validation():
    with pytest.raises(ValueError):
        KillingField(np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        KillingField.from_upper([1, 2], [0, 0, 0])


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-2, 2), min_size=3, max_size=3),
)
def test_killing_fields_are_infinitesimal_isometries(upper, trans, x):
    V = KillingField.from_upper(upper, trans)
    x = np.array(x)
    y = x + np.array([0.5, -1.0, 0.25])
    # <V(x) - V(y), x - y> = 0 for every Killing field
    dv = np.asarray(V(x) - V(y), dtype=float)
    assert abs(dv @ (x - y)) < 1e-12


def test_killing_rotated_conjugation():
    R = orthonormalize(np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]]))
    V = KillingField.named("tx").rotated(R)
    assert np.allclose(np.asarray(V.translation, dtype=float), [0, 1, 0])
    W = KillingField.named("rx").rotated(R)
    x = np.array([0.2, 0.7, -0.4])
    expect = R @ np.asarray(KillingField.named("rx")(np.asarray(R, dtype=float).T @ x), dtype=float)
    assert np.allclose(np.asarray(W(x), dtype=float), expect)


# ---------------------------------------------------------------- graph quantities


def test_catenoid_graph_and_q(catenoid, cat_params):
    c = cat_params.c
    tz = KillingField.named("tz")
    P = np.array([[0.4, 0.6], [2.0, -0.9]])
    S = P[:, 1]
    sv = np.asarray(graph_quantity(catenoid, tz, P), dtype=float)
    assert np.allclose(sv, -np.tanh(S), atol=1e-15)
    q = np.asarray(q_quantity(catenoid, tz, P), dtype=float)
    assert np.allclose(q, (c * (1 - S * np.tanh(S))) ** 2 / np.tanh(S) ** 2, rtol=1e-13)
    with pytest.raises(ZeroGraphQuantityError) as info:
        q_quantity(catenoid, tz, [0.3, 0.0])
    assert info.value.points.shape == (1, 2)
    rz = KillingField.named("rz")
    assert abs(float(graph_quantity(catenoid, rz, [0.5, 0.5]))) < 1e-15


def test_sample_with_killing_field(disk2):
    g = sample(disk2, [0.5, 1.0], KillingField.named("tz"))
    assert float(g.s_v) == 1.0
    assert float(g.v_sq) == 1.0
    assert float(g.q) == 0.0


def test_support_vanishes_on_free_boundary(catenoid, cat_params):
    s0 = cat_params.s0
    P = np.column_stack([np.linspace(0, 6, 7), np.full(7, s0)])
    assert np.abs(np.asarray(support_function(catenoid, P), dtype=float)).max() < 1e-10
    assert float(support_function(catenoid, [0.0, 0.0])) == pytest.approx(cat_params.c, rel=1e-15)


# ---------------------------------------------------------------- operators


def test_laplacian_of_r_squared_on_disk(disk2, disk3):
    def r2(P):
        return np.asarray(P[:, 0]) ** 2

    assert float(laplace_beltrami(disk2, r2, [0.5, 1.0])) == pytest.approx(4.0, abs=1e-8)
    assert float(laplace_beltrami(disk3, r2, [0.5, 1.2, 0.4])) == pytest.approx(6.0, abs=1e-8)


def test_coordinate_functions_harmonic_on_catenoid(catenoid):
    P = np.array([[0.5, 0.3], [3.0, -0.6]])
    for k in range(3):
        def xk(Q, k=k):
            return catenoid.evaluate(Q)[:, k]

        lap = np.asarray(laplace_beltrami(catenoid, xk, P, h=1e-3), dtype=float)
        assert np.abs(lap).max() < 1e-5


def test_gradient_of_coordinate_on_disk(disk2):
    def x(P):
        return disk2.evaluate(P)[:, 0]

    _, g2 = surface_gradient(disk2, x, [0.6, 0.8], order=4)
    assert float(g2) == pytest.approx(1.0, abs=1e-9)


def test_nabla_A_on_catenoid(catenoid, cat_params):
    # |nabla A|^2 = 1/2 Delta|A|^2 + |A|^4 with |A|^2 = 2/(c^2 cosh^4 s) and
    # Delta f(s) = f''(s)/(c^2 cosh^2 s) in the conformal chart
    c = cat_params.c
    s = 0.5
    a2 = lambda t: 2 / (c**2 * mpmath.cosh(t) ** 4)  # noqa: E731
    lap = mpmath.diff(a2, s, 2) / (c**2 * mpmath.cosh(s) ** 2)
    expect = float(0.5 * lap + a2(s) ** 2)
    got = float(nabla_A_norm_sq(catenoid, [0.2, s], h=1e-3))
    assert got == pytest.approx(expect, rel=1e-5)


# ---------------------------------------------------------------- quadrature


def test_gauss_legendre_box():
    rule = QuadratureRule(6)
    X, W = rule.nodes_weights([0, -1], [2, 3])
    assert float(np.sum(W)) == pytest.approx(8.0, rel=1e-15)
    x, y = np.asarray(X[:, 0], dtype=float), np.asarray(X[:, 1], dtype=float)
    # exact up to degree 11 per axis
    assert float(np.sum(W * x**11 * y**10)) == pytest.approx((2**12 / 12) * (3**11 + 1) / 11, rel=1e-13)
    with pytest.raises(ValueError):
        QuadratureRule(1)


def test_areas_against_closed_forms(disk2, disk3, catenoid, cat_params):
    assert surface_area(disk2) == pytest.approx(np.pi, rel=1e-14)
    assert surface_area(disk3) == pytest.approx(4 * np.pi / 3, rel=1e-13)
    assert boundary_volume(disk2) == pytest.approx(2 * np.pi, rel=1e-14)
    c, s0 = cat_params.c, cat_params.s0
    area = 2 * mpmath.pi * c**2 * mpmath.quad(lambda s: mpmath.cosh(s) ** 2, [-s0, s0])
    assert surface_area(catenoid) == pytest.approx(float(area), rel=1e-12)
    assert boundary_volume(catenoid) == pytest.approx(4 * np.pi * c * np.cosh(s0), rel=1e-13)


def test_cap_area(cap):
    assert surface_area(cap) == pytest.approx(np.pi, rel=1e-13)
    assert boundary_volume(cap) == pytest.approx(2 * np.pi * np.sqrt(0.75), rel=1e-13)


def test_certified_quadrature_refuses_oscillation():
    calls = iter([1.0, 2.0, 1.0, 3.0, 0.0, 10.0])
    with pytest.raises(QuadratureNonConvergence) as info:
        certified(lambda r: next(calls), QuadratureRule(4))
    assert len(info.value.history) >= 3


def test_integrate_surface_integrand(disk2):
    val = integrate_surface(disk2, lambda geo: geo.F[:, 0] ** 2, QuadratureRule(16)).value
    assert val == pytest.approx(np.pi / 4, rel=1e-13)
