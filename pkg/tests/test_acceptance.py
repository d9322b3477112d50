"""Acceptance suite: the nine primary criteria at their stated tolerances.

Each test prints one ``criterion k: PASS|FAIL`` line (visible under
``pytest -v`` and ``-s``) before asserting.
"""

import time

import numpy as np
import pytest
from scipy.optimize import bisect
from scipy.stats import special_ortho_group

from freebound.exact import critical_catenoid_parameters, shoot_rotational
from freebound.geometry.core import KillingField, local_geometry, support_function
from freebound.mesh import SolverConfig, graph_disk, minimize
from freebound.mesh.discrete import discrete_isoperimetric_residual, flatness_metrics
from freebound.verify import (
    BoundaryGrid,
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
    graphical_subgrid,
    interior_grid,
    killing_zero_search,
)

HS = (2e-3, 1e-3, 5e-4)
TZ = KillingField.named("tz")

ODD_HEIGHTS = {
    "0.2*x*(1-r^2)": lambda r, x, y: 0.2 * x * (1 - r**2),
    "0.3*y*(1-r^2)": lambda r, x, y: 0.3 * y * (1 - r**2),
    "0.1*(x^3-3*x*y^2)": lambda r, x, y: 0.1 * (x**3 - 3 * x * y**2),
    "0.25*x": lambda r, x, y: 0.25 * x,
    "0.15*sin(pi*x)*cos(pi*y)": lambda r, x, y: 0.15 * np.sin(np.pi * x) * np.cos(np.pi * y),
}


def verdict(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {k}: {detail}"


def _interior_reports(surf, V, grid):
    sub = graphical_subgrid(surf, V, grid)
    return {
        "graph-laplacian": check_graph_laplacian(surf, V, grid),
        "v2": check_v2_identity(surf, V, sub),
        "u2": check_u2_identity(surf, grid),
        "simons": check_simons(surf, grid),
        "q": check_q_inequality(surf, V, sub),
    }


# ---------------------------------------------------------------- 1


def test_criterion_1_isoperimetric(capsys, disk2, disk3, catenoid, rot3, cap):
    t0 = time.perf_counter()
    res = {
        "disk2": check_isoperimetric(disk2).residual_max,
        "disk3": check_isoperimetric(disk3).residual_max,
        "catenoid": check_isoperimetric(catenoid).residual_max,
        "rotational3": check_isoperimetric(rot3).residual_max,
        "cap": check_isoperimetric(cap).residual_max,
    }
    elapsed = time.perf_counter() - t0
    ok = (
        res["disk2"] < 1e-12
        and res["disk3"] < 1e-12
        and res["catenoid"] < 1e-9
        and res["rotational3"] < 1e-8
        and res["cap"] > 1e-2
        and elapsed < 5
    )
    detail = ", ".join(f"{k}={v:.3g}" for k, v in res.items()) + f", {elapsed:.2f}s"
    verdict(capsys, 1, ok, detail)


# ---------------------------------------------------------------- 2


def test_criterion_2_elliptic_identities(capsys, catenoid):
    t0 = time.perf_counter()
    grid = interior_grid(catenoid, 24)
    sub = graphical_subgrid(catenoid, TZ, grid)
    studies = {
        "graph-laplacian": convergence_study(check_graph_laplacian, HS, surf=catenoid, V=TZ, grid=grid),
        "v2": convergence_study(check_v2_identity, HS, surf=catenoid, V=TZ, grid=sub),
        "u2": convergence_study(check_u2_identity, HS, surf=catenoid, grid=grid),
        "simons": convergence_study(check_simons, HS, surf=catenoid, grid=grid),
    }
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60
    parts = []
    for name, st in studies.items():
        at_1e3 = st.residuals[HS.index(1e-3)]
        ok &= at_1e3 < 1e-3 and st.min_order >= 1.9
        parts.append(f"{name} {at_1e3:.2g} (order {st.min_order:.2f})")
    verdict(capsys, 2, ok, "; ".join(parts) + f"; {elapsed:.1f}s")


# ---------------------------------------------------------------- 3


def test_criterion_3_q_inequality(capsys, catenoid):
    sub = graphical_subgrid(catenoid, TZ, interior_grid(catenoid, 24))
    reps = [check_q_inequality(catenoid, TZ, sub, h=h) for h in HS]
    min_D = min(r.details["min_D"] for r in reps)
    ident = [r.details["identity_residual_max"] for r in reps]
    orders = [np.log(ident[i] / ident[i + 1]) / np.log(HS[i] / HS[i + 1]) for i in range(len(HS) - 1)]
    alg = max(r.details["algebraic_residual_max"] for r in reps)
    ok = min_D >= -1e-4 and min(orders) >= 1.9 and alg < 1e-10
    detail = f"min D = {min_D:.4g}, rearrangement residuals {', '.join(f'{x:.2g}' for x in ident)} (order {min(orders):.2f}), expansion {alg:.2g}"
    verdict(capsys, 3, ok, detail)


# ---------------------------------------------------------------- 4


def test_criterion_4_boundary_relations(capsys, catenoid, rot3):
    bgrid = BoundaryGrid(64)
    cat_rel = check_boundary_relations(catenoid, bgrid)
    cat_nA2 = check_normal_derivative_A2(catenoid, bgrid)
    rot_rel = check_boundary_relations(rot3, bgrid)
    rot_nA2 = check_normal_derivative_A2(rot3, bgrid)
    h_in = max(cat_rel.details["h_in_max"], rot_rel.details["h_in_max"])
    cat = max(cat_rel.residual_max, cat_nA2.residual_max)
    rot = max(rot_rel.residual_max, rot_nA2.residual_max)
    ok = cat < 5e-3 and rot < 1e-2 and h_in < 1e-6 and cat_rel.grid["n_points"] == 128
    verdict(capsys, 4, ok, f"catenoid {cat:.3g}, rotational3 {rot:.3g}, h_in {h_in:.3g}")


# ---------------------------------------------------------------- 5


def test_criterion_5_catenoid_parameters(capsys, catenoid):
    p = critical_catenoid_parameters()
    root = abs(p.root_residual())
    oracle = bisect(lambda s: s * np.tanh(s) - 1, 1.0, 1.5, xtol=1e-15, rtol=1e-15)
    agree = abs(oracle - p.s0)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    P = np.concatenate([np.column_stack([th, np.full_like(th, s)]) for s in (-p.s0, p.s0)])
    u_b = float(np.abs(np.asarray(support_function(catenoid, P), dtype=float)).max())
    shot = shoot_rotational(2)
    dc = abs(shot.waist - p.c)
    ds = abs(shot.z_end / shot.waist - p.s0)
    ok = root < 1e-12 and agree < 1e-12 and u_b < 1e-10 and dc < 1e-8 and ds < 1e-8
    detail = f"|s tanh s - 1| = {root:.2g}, bisection vs Newton {agree:.2g}, boundary u {u_b:.2g}, shooting dc {dc:.2g} ds0 {ds:.2g}"
    verdict(capsys, 5, ok, detail)


# ---------------------------------------------------------------- 6


def test_criterion_6_graphical_disks_flatten(capsys):
    t0 = time.perf_counter()
    ok = True
    worst = {"plane": 0.0, "A2": 0.0, "iso64": 0.0}
    failures = []
    for res in (32, 64):
        for name, height in ODD_HEIGHTS.items():
            out = minimize(graph_disk(res, height), SolverConfig(), raise_on_failure=False)
            f = flatness_metrics(out.mesh)
            iso = discrete_isoperimetric_residual(out.mesh)
            good = out.converged and f.plane_deviation < 1e-3 and f.max_A2 < 1e-2
            if res == 64:
                good &= iso < 1e-3
                worst["iso64"] = max(worst["iso64"], iso)
            worst["plane"] = max(worst["plane"], f.plane_deviation)
            worst["A2"] = max(worst["A2"], f.max_A2)
            if not good:
                failures.append(f"{name}@{res} ({out.reason})")
            ok &= good
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    detail = (
        f"10 runs, max plane deviation {worst['plane']:.2g}, max |A|^2 {worst['A2']:.2g}, "
        f"max isoperimetric@64 {worst['iso64']:.2g}, {elapsed:.0f}s"
    )
    if failures:
        detail += "; failed: " + ", ".join(failures)
    verdict(capsys, 6, ok, detail)


# ---------------------------------------------------------------- 7


def test_criterion_7_killing_zeros(capsys, catenoid, disk2):
    found = {}
    for V in KillingField.basis(3):
        found[V.name] = killing_zero_search(catenoid, V).found
    disk = killing_zero_search(disk2, TZ)
    ok = all(found.values()) and disk.certified_positive and disk.min_value == 1.0 and not disk.found
    detail = "catenoid zeros " + ", ".join(f"{k}:{'yes' if v else 'no'}" for k, v in found.items())
    detail += f"; disk e3 certified={disk.certified_positive}, min s_V = {disk.min_value:.17g}"
    verdict(capsys, 7, ok, detail)


# ---------------------------------------------------------------- 8


def test_criterion_8_curvature_gap_ingredients(capsys, catenoid):
    flux = check_flux_balance(catenoid)
    gap = curvature_gap_report(catenoid)
    prop = flux.details["boundary_formula_residual"]
    chain = gap.details["chain_residual"]
    ok = prop < 1e-5 and chain < 1e-5
    verdict(capsys, 8, ok, f"flux balance {prop:.3g}, integrated Simons chain {chain:.3g}")


# ---------------------------------------------------------------- 9


def _criteria_1_to_4(surf, V, grid, bgrid, interior=True):
    out = {"isoperimetric": check_isoperimetric(surf).residual_max}
    if interior:
        for k, r in _interior_reports(surf, V, grid).items():
            out[k] = r.residual_max
            if k == "q":
                out["q-min-D"] = r.details["min_D"]
    if surf.boundary_faces and surf.free_boundary:
        out["boundary"] = check_boundary_relations(surf, bgrid).residual_max
        out["nA2"] = check_normal_derivative_A2(surf, bgrid).residual_max
    return out


def test_criterion_9_invariance(capsys, disk2, disk3, catenoid, rot3):
    grid = interior_grid(catenoid, 24)
    bgrid = BoundaryGrid(64)
    base = {
        "catenoid": _criteria_1_to_4(catenoid, TZ, grid, bgrid),
        "rot3": _criteria_1_to_4(rot3, None, None, bgrid, interior=False),
        "disk2": _criteria_1_to_4(disk2, None, None, bgrid, interior=False),
        "disk3": _criteria_1_to_4(disk3, None, None, bgrid, interior=False),
    }
    surfaces = {"catenoid": catenoid, "rot3": rot3, "disk2": disk2, "disk3": disk3}
    R3 = special_ortho_group.rvs(3, size=10, random_state=20240611)
    R4 = special_ortho_group.rvs(4, size=10, random_state=20240612)
    worst = {}
    for k in range(10):
        for name, surf in surfaces.items():
            R = R4[k] if surf.ambient_dim == 4 else R3[k]
            V = TZ.rotated(R) if name == "catenoid" else None
            got = _criteria_1_to_4(surf.rotated(R), V, grid, bgrid, interior=name == "catenoid")
            for key, val in base[name].items():
                worst[key] = max(worst.get(key, 0.0), abs(got[key] - val))
    # normal flip: orientation-even residuals unchanged, s_V and u change sign
    flip = _criteria_1_to_4(catenoid.flipped(), TZ, grid, bgrid)
    flip_diff = max(abs(flip[k] - base["catenoid"][k]) for k in flip)
    P = grid.points()
    a, b = local_geometry(catenoid, P), local_geometry(catenoid.flipped(), P)
    sv_flip = float(np.abs(np.asarray(a.s_v(TZ) + b.s_v(TZ), dtype=float)).max())
    u_flip = float(np.abs(np.asarray(a.support + b.support, dtype=float)).max())
    a2_even = float(np.abs(np.asarray(a.A2 - b.A2, dtype=float)).max())
    over = {key: d for key, d in worst.items() if d >= 1e-10}
    ok = not over and flip_diff < 1e-10 and sv_flip < 1e-15 and u_flip < 1e-15 and a2_even < 1e-12
    detail = (
        f"10 rotations: max residual change {max(worst.values()):.2g}"
        + (" (over 1e-10: " + ", ".join(f"{k} {d:.2g}" for k, d in over.items()) + ")" if over else "")
        + f"; flip: residual change {flip_diff:.2g}, "
        f"s_V+s_V' {sv_flip:.2g}, u+u' {u_flip:.2g}"
    )
    verdict(capsys, 9, ok, detail)


@pytest.fixture(autouse=True)
def _quiet_numpy():
    with np.errstate(all="ignore"):
        yield
