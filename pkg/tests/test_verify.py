"""Identity checks, gates, reports and the zero search."""

import json
import math

import numpy as np
import pytest

from freebound.errors import PreconditionViolation, ZeroGraphQuantityError
from freebound.geometry.core import KillingField
from freebound.verify import (
    CHECKS,
    REPORT_VERSION,
    BoundaryGrid,
    VerificationReport,
    boundary_relation_terms,
    check_boundary_relations,
    check_flux_balance,
    check_graph_laplacian,
    check_isoperimetric,
    check_normal_derivative_A2,
    check_q_inequality,
    check_simons,
    check_u2_identity,
    check_v2_identity,
    convergence_study,
    curvature_gap_report,
    dumps,
    graphical_subgrid,
    interior_grid,
    killing_zero_search,
    run_check,
    zero_search_report,
)

TZ = KillingField.named("tz")

# ---------------------------------------------------------------- reports


def _report(**kw):
    base = dict(check_name="x", surface_id="s", grid={"kind": "k"}, residual_max=1e-4, residual_l2=1e-5, tolerance=1e-3, h_used=1e-3)
    base.update(kw)
    return VerificationReport(**base)


def test_passed_is_residual_below_tolerance():
    assert _report().passed
    assert not _report(residual_max=1e-3).passed
    assert not _report(residual_max=float("inf")).passed
    assert not _report(residual_max=float("nan")).passed


def test_report_roundtrip_and_version():
    r = _report(details={"a": [1.0, 2.0]}, notes="n")
    d = json.loads(dumps(r.to_dict()))
    assert d["report_version"] == REPORT_VERSION
    back = VerificationReport.from_dict(d)
    assert back == r
    d["report_version"] = REPORT_VERSION + 1
    with pytest.raises(ValueError):
        VerificationReport.from_dict(d)


def test_dumps_full_precision_and_nonfinite():
    text = dumps({"a": 0.1, "b": float("inf"), "c": np.float64(1 / 3), "d": np.array([1, 2]), "e": True})
    d = json.loads(text)
    assert d["a"] == 0.1 and d["b"] is None and d["d"] == [1, 2] and d["e"] is True
    assert "0.33333333333333331" in text


# ---------------------------------------------------------------- grids


def test_interior_grid_is_cell_centred(catenoid):
    g = interior_grid(catenoid, 4)
    P = g.points()
    assert P.shape == (16, 2)
    assert P[:, 1].min() > catenoid.lower[1] and P[:, 1].max() < catenoid.upper[1]
    assert g.describe()["n_points"] == 16


def test_graphical_subgrid_drops_waist(catenoid):
    g = graphical_subgrid(catenoid, TZ, interior_grid(catenoid, 24))
    P = g.points()
    assert 0 < len(P) < 24 * 24
    assert np.abs(np.tanh(P[:, 1])).min() > 0.05


def test_boundary_grid_counts(catenoid, rot3):
    assert BoundaryGrid(64).describe(catenoid)["n_points"] == 128
    assert BoundaryGrid(64).describe(rot3)["n_points"] == 128


# ---------------------------------------------------------------- interior identities


def test_disk_interior_identities_vanish(disk2):
    g = interior_grid(disk2, 8)
    assert check_graph_laplacian(disk2, TZ, g).residual_max < 1e-12
    assert check_u2_identity(disk2, g).residual_max < 1e-12
    assert check_simons(disk2, g).residual_max < 1e-12
    # v^2 = 1: only FD roundoff of order eps / h^2 remains
    assert check_v2_identity(disk2, TZ, g).residual_max < 1e-9


def test_catenoid_identities_pass(catenoid):
    g = interior_grid(catenoid, 24)
    sub = graphical_subgrid(catenoid, TZ, g)
    for rep in (
        check_graph_laplacian(catenoid, TZ, g),
        check_u2_identity(catenoid, g),
        check_simons(catenoid, g),
        check_v2_identity(catenoid, TZ, sub),
        check_q_inequality(catenoid, TZ, sub),
    ):
        assert rep.passed, rep
        assert rep.surface_id == "catenoid"
        assert rep.h_used == 1e-3


def test_rotation_field_is_jacobi_on_catenoid(catenoid):
    # s_V vanishes identically for the axial rotation
    rep = check_graph_laplacian(catenoid, KillingField.named("rz"), interior_grid(catenoid, 6))
    assert rep.residual_max < 1e-12


def test_tilted_translation_v2(catenoid):
    V = KillingField.translation_field(np.array([1.0, 0.0, 1.0]) / np.sqrt(2))
    g = interior_grid(catenoid, 24)
    sub = graphical_subgrid(catenoid, V, g)
    # near the cutoff v = 1/s_V reaches 20, so the absolute residual is large
    # at h = 1e-3; the fourth-order stencil still converges at its order
    study = convergence_study(check_v2_identity, (1e-3, 5e-4), surf=catenoid, V=V, grid=sub)
    assert study.min_order > 3.8


def test_q_details(catenoid):
    sub = graphical_subgrid(catenoid, TZ, interior_grid(catenoid, 24))
    rep = check_q_inequality(catenoid, TZ, sub)
    assert rep.details["min_D"] > 0
    assert rep.details["violation"] == 0
    assert rep.details["algebraic_residual_max"] < 1e-12


def test_graphical_gate(catenoid, disk2):
    with pytest.raises(ZeroGraphQuantityError):
        # the 24-point grid has centres at s = +-0.05/1.2 s0, where |s_V| < 0.05
        check_v2_identity(catenoid, TZ, interior_grid(catenoid, 24))
    with pytest.raises(ZeroGraphQuantityError):
        check_q_inequality(disk2, KillingField.named("rz"), graphical_subgrid(disk2, KillingField.named("rz"), interior_grid(disk2, 6)))


def test_minimality_gate(cap):
    g = interior_grid(cap, 6)
    for fn in (check_u2_identity, check_simons):
        with pytest.raises(PreconditionViolation):
            fn(cap, g)
    with pytest.raises(PreconditionViolation):
        check_graph_laplacian(cap, TZ, g)
    with pytest.raises(PreconditionViolation):
        check_boundary_relations(cap)
    with pytest.raises(PreconditionViolation):
        curvature_gap_report(cap)


def test_convergence_study_order(catenoid):
    g = interior_grid(catenoid, 8)
    study = convergence_study(check_u2_identity, (2e-3, 1e-3), surf=catenoid, grid=g)
    assert len(study.orders) == 1
    assert study.min_order == pytest.approx(2.0, abs=0.1)


# ---------------------------------------------------------------- boundary


def test_boundary_relations_catenoid(catenoid, cat_params):
    rep = check_boundary_relations(catenoid)
    assert rep.passed
    assert rep.details["h_in_max"] < 1e-12
    assert rep.details["conormal_minus_position_max"] < 1e-12
    # h_nn = -h_tt = +-1/(c cosh^2 s0) on the boundary circles
    c, s0 = cat_params.c, cat_params.s0
    for t in boundary_relation_terms(catenoid, BoundaryGrid(8)):
        hnn = np.asarray(t["h_nn"], dtype=float)
        assert np.allclose(np.abs(hnn), 1 / (c * np.cosh(s0) ** 2), rtol=1e-13)


def test_normal_derivative_A2_closed_form(catenoid, cat_params):
    c, s0 = cat_params.c, cat_params.s0
    # d|A|^2/ds = -8 sinh s/(c^2 cosh^5 s), unit conormal speed ds/dl = 1/(c cosh s)
    expect = -8 * np.sinh(s0) / (c**3 * np.cosh(s0) ** 6)
    rep = check_normal_derivative_A2(catenoid)
    assert rep.passed
    assert rep.details["dn_A2"] == pytest.approx([expect, expect], rel=1e-6)


def test_boundary_relations_disk3(disk3):
    assert check_boundary_relations(disk3, BoundaryGrid(16)).residual_max < 1e-12


# ---------------------------------------------------------------- integral identities


def test_isoperimetric(disk2, catenoid, cap):
    assert check_isoperimetric(disk2).residual_max < 1e-14
    rep = check_isoperimetric(catenoid)
    assert rep.passed
    assert rep.details["conormal_dot_F_minus_one_max"] < 1e-12
    assert rep.details["divergence_identity_residual"] < 1e-12
    bad = check_isoperimetric(cap, tol=1e-2)
    # 2 pi (0.5) against 2 pi sqrt(0.75)
    assert bad.residual_max == pytest.approx(abs(1 - np.sqrt(0.75)) / np.sqrt(0.75), rel=1e-10)
    assert not bad.passed


def test_flux_balance_on_cap_and_catenoid(cap, catenoid):
    # divergence theorem only (cap is neither minimal nor free boundary)
    rep = check_flux_balance(cap)
    assert rep.passed
    assert "boundary_formula_residual" not in rep.details
    rep = check_flux_balance(catenoid)
    assert rep.passed
    assert rep.details["boundary_formula_residual"] < 1e-5


def test_curvature_gap_catenoid(catenoid, cat_params):
    c, s0 = cat_params.c, cat_params.s0
    rep = curvature_gap_report(catenoid)
    assert rep.passed
    d = rep.details
    # sampled maximum: the grid misses the waist by half a cell
    assert d["sup_A2"] == pytest.approx(2 / c**2, rel=5e-3)
    assert d["sup_A2"] <= 2 / c**2
    assert d["inf_boundary_A2"] == pytest.approx(2 / (c**2 * np.cosh(s0) ** 4), rel=1e-12)
    assert d["gap_value"] == pytest.approx(d["sup_A2"] ** 2 - 2 * d["inf_boundary_A2"])
    assert "not instantiated" in rep.notes
    assert d["chain_residual"] < 1e-5


# ---------------------------------------------------------------- zero search


@pytest.mark.parametrize("name", ["tx", "ty", "tz", "rx", "ry", "rz"])
def test_catenoid_killing_zeros(catenoid, name):
    rep = zero_search_report(catenoid, KillingField.named(name))
    assert rep.passed
    assert rep.details["zeros_found"] > 0


def test_tz_zero_is_waist(catenoid):
    res = killing_zero_search(catenoid, TZ, counts=32)
    assert res.found
    assert np.abs(res.zeros[:, 1]).max() < 1e-9


def test_disk_tz_certified(disk2):
    res = killing_zero_search(disk2, TZ, counts=32)
    assert not res.found
    assert res.certified_positive
    assert res.min_value == 1.0
    rep = zero_search_report(disk2, TZ)
    assert rep.passed and "no zero required" in rep.notes


def test_disk_tx_has_zero(disk2):
    res = killing_zero_search(disk2, KillingField.named("tx"), counts=16)
    assert res.identically_zero


# ---------------------------------------------------------------- dispatch


def test_run_check_gate_becomes_failed_report(cap):
    rep = run_check("simons", cap)
    assert not rep.passed
    assert math.isinf(rep.residual_max)
    assert rep.notes.startswith("precondition failed")


def test_run_check_all_names(disk2):
    for name in CHECKS:
        rep = run_check(name, disk2, grid=6)
        assert isinstance(rep, VerificationReport)
    with pytest.raises(KeyError):
        run_check("nope", disk2)


# ---------------------------------------------------------------- invariance


def test_flip_invariance(catenoid):
    flip = catenoid.flipped()
    g = interior_grid(catenoid, 8)
    for fn in (check_u2_identity, check_simons):
        assert fn(flip, g).residual_max == pytest.approx(fn(catenoid, g).residual_max, abs=1e-10)
    assert check_boundary_relations(flip).residual_max == pytest.approx(
        check_boundary_relations(catenoid).residual_max, abs=1e-10
    )


def test_rotation_invariance_below_roundoff_floor(catenoid):
    from scipy.stats import special_ortho_group

    R = special_ortho_group.rvs(3, random_state=7)
    rot, V = catenoid.rotated(R), TZ.rotated(R)
    g = interior_grid(catenoid, 12)
    for fn in (check_u2_identity, check_simons):
        assert fn(rot, g).residual_max == pytest.approx(fn(catenoid, g).residual_max, abs=1e-10)
    assert check_graph_laplacian(rot, V, g).residual_max == pytest.approx(
        check_graph_laplacian(catenoid, TZ, g).residual_max, abs=1e-10
    )
    # v^2 reaches 400 on the sub-band: long-double roundoff of size eps v^2/h^2
    # is what separates the two frames, so a coarser step keeps it below 1e-10
    sub = graphical_subgrid(catenoid, TZ, interior_grid(catenoid, 24))
    a = check_v2_identity(catenoid, TZ, sub, h=8e-3).residual_max
    b = check_v2_identity(rot, V, sub, h=8e-3).residual_max
    assert a == pytest.approx(b, abs=1e-10)
