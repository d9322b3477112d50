"""Command line: ``freebound verify | solve | report | replay``.

Exit codes: 0 success, 1 a check failed or the solver did not converge,
2 usage error (unknown surface or check, bad expression, incompatible
report files).  Outputs go to ``--out`` (default ``$FREEBOUND_OUT_DIR`` or
``./freebound_out``) and are written atomically; every command also writes
a ``manifest_<command>.json`` describing how to reproduce it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

SURFACES = ("disk", "catenoid", "rotational", "cap")
SUMMARY_COLUMNS = ("surface_id", "check_name", "passed", "residual_max", "residual_l2", "tolerance", "h_used", "notes")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output plumbing


def out_dir(arg) -> Path:
    path = Path(arg or os.environ.get("FREEBOUND_OUT_DIR") or "freebound_out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def atomic_write(path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _atomic_via(path, writer) -> Path:
    """Let ``writer(tmp_path)`` produce a file, then move it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


@dataclass
class RunManifest:
    command: str
    surface: dict
    parameters: dict
    outputs: list
    argv: list
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def write(self, directory: Path) -> Path:
        return atomic_write(directory / f"manifest_{self.command}.json", json.dumps(asdict(self), indent=2) + "\n")


def fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def table(rows, columns) -> str:
    cells = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


# ---------------------------------------------------------------- verify


def _surface_kwargs(args) -> dict:
    kw = {}
    if args.dim is not None:
        kw["n"] = args.dim
    if args.surface == "cap" and args.cap_height is not None:
        kw["height"] = args.cap_height
    return kw


def parse_killing(text: str, dim: int):
    """A basis name (``tz``, ``rx``, ...) or ``skew=<m*m row-major>;translation=<m>``.

    Either part of the explicit form may be omitted and defaults to zero.
    """
    import numpy as np

    from .geometry.core import KillingField

    if "=" not in text:
        return KillingField.named(text, dim)
    parts = {}
    for item in text.split(";"):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in ("skew", "translation") or key in parts:
            raise ValueError(f"bad Killing field component {item!r}")
        try:
            parts[key] = [float(x) for x in val.split(",")]
        except ValueError:
            raise ValueError(f"non-numeric entry in {key}") from None
    skew = np.array(parts.get("skew", [0.0] * dim * dim))
    trans = np.array(parts.get("translation", [0.0] * dim))
    if skew.size != dim * dim or trans.size != dim:
        raise ValueError(f"expected {dim * dim} skew entries and {dim} translation entries")
    if not np.all(np.isfinite(skew)) or not np.all(np.isfinite(trans)):
        raise ValueError("Killing field entries must be finite")
    return KillingField(skew.reshape(dim, dim), trans, "custom")


def _run_one(job):
    """Worker: build the surface and run one check (top level so it pickles)."""
    from .exact import surface_by_name
    from .verify import run_check

    surface, kw, check, killing, grid, h, quad_points = job
    surf = surface_by_name(surface, **kw)
    V = parse_killing(killing, surf.ambient_dim) if killing else None
    return run_check(check, surf, V, grid=grid, h=h, quad_points=quad_points).to_dict()


def _parse_checks(text: str) -> list:
    from .verify import CHECKS

    if text == "all":
        return list(CHECKS)
    names = [c.strip() for c in text.split(",") if c.strip()]
    unknown = [c for c in names if c not in CHECKS]
    if unknown or not names:
        raise UsageError(f"unknown check(s) {', '.join(unknown) or '(none)'}; choose from {', '.join(CHECKS)} or 'all'")
    return names


def cmd_verify(args) -> int:
    from .verify import dumps

    checks = _parse_checks(args.checks)
    kw = _surface_kwargs(args)
    if args.killing:
        from .exact import surface_by_name

        dim = surface_by_name(args.surface, **kw).ambient_dim
        try:
            parse_killing(args.killing, dim)
        except (KeyError, ValueError) as exc:
            raise UsageError(exc.args[0] if exc.args else str(exc)) from None
    jobs = [(args.surface, kw, c, args.killing, args.grid, args.h, args.quad_points) for c in checks]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(j) for j in jobs]

    d = out_dir(args.out)
    stem = f"verify_{reports[0]['surface_id']}"
    json_path = atomic_write(d / f"{stem}.json", dumps(reports) + "\n")
    text = table(reports, ("check_name", "passed", "residual_max", "residual_l2", "tolerance", "h_used"))
    txt_path = atomic_write(d / f"{stem}.txt", text + "\n")
    RunManifest(
        "verify",
        {"name": args.surface, **kw},
        {"checks": checks, "killing": args.killing, "grid": args.grid, "h": args.h, "quad_points": args.quad_points},
        [str(json_path), str(txt_path)],
        list(args.argv),
    ).write(d)
    print(text)
    failed = [r for r in reports if not r["passed"]]
    for r in failed:
        print(
            f"FAIL {r['check_name']} on {r['surface_id']}: residual_max={r['residual_max']:.6g} "
            f"tolerance={r['tolerance']:.6g} {r['notes']}",
            file=sys.stderr,
        )
    return 1 if failed else 0


# ---------------------------------------------------------------- solve


def cmd_solve(args) -> int:
    from .errors import GraphicalityViolation
    from .exact import critical_catenoid_parameters
    from .expr import ExpressionError, parse_height
    from .mesh.builders import flat_disk, graph_disk
    from .mesh.discrete import boundary_orthogonality, discrete_isoperimetric_residual, flatness_metrics
    from .mesh.solver import SolverConfig, find_critical_annulus, minimize, waist_radius, write_trace_csv
    from .verify import dumps

    try:
        config = SolverConfig(
            max_iter=args.max_iter,
            grad_tol=args.grad_tol,
            disp_tol=args.disp_tol,
            metric=args.metric,
            boundary_motion=args.boundary_motion,
            interior_motion=args.interior_motion or ("normal" if args.init == "annulus" else "full"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    if args.init == "graph":
        try:
            height = parse_height(args.height)
            mesh = graph_disk(args.res, height)
        except (ExpressionError, GraphicalityViolation, ValueError) as exc:
            raise UsageError(f"invalid graph initialisation: {exc}") from None
        result = minimize(mesh, config, raise_on_failure=False)
    elif args.init == "flat":
        result = minimize(flat_disk(args.res), config, raise_on_failure=False)
    else:
        result = find_critical_annulus(args.res, config, raise_on_failure=False)

    m = result.mesh
    fm = flatness_metrics(m)
    summary = {
        "init": args.init,
        "height": args.height if args.init == "graph" else None,
        "resolution": args.res,
        "converged": result.converged,
        "reason": result.reason,
        "iterations": result.iterations,
        "retries": result.retries,
        "area": m.area(),
        "boundary_length": m.boundary_length(),
        "isoperimetric_residual": discrete_isoperimetric_residual(m),
        "boundary_orthogonality": boundary_orthogonality(m),
        "max_boundary_radius_error": float(np.max(np.abs(np.linalg.norm(m.vertices[m.boundary_mask], axis=1) - 1))),
        "flatness": fm.to_dict(),
    }
    if args.init == "annulus":
        c = critical_catenoid_parameters().c
        summary["annulus"] = {
            "waist_radius": waist_radius(m),
            "waist_ratio_to_c": waist_radius(m) / c,
            **{k: v for k, v in result.meta.items()},
        }

    d = out_dir(args.out)
    stem = f"solve_{args.init}_{args.res}"
    obj = _atomic_via(d / f"{stem}.obj", m.to_obj)
    trace = _atomic_via(d / f"{stem}_trace.csv", lambda p: write_trace_csv(result.trace, p))
    flat = atomic_write(d / f"{stem}_flatness.json", dumps(summary) + "\n")
    RunManifest(
        "solve",
        {"init": args.init, "height": summary["height"]},
        {"resolution": args.res, **asdict(config)},
        [str(obj), str(trace), str(flat)],
        list(args.argv),
    ).write(d)

    rows = [{"quantity": k, "value": v} for k, v in summary.items() if not isinstance(v, dict)]
    rows += [{"quantity": f"flatness.{k}", "value": v} for k, v in fm.to_dict().items() if k != "plane_normal"]
    rows += [{"quantity": f"annulus.{k}", "value": v} for k, v in summary.get("annulus", {}).items()]
    print(table(rows, ("quantity", "value")))
    if not result.converged:
        print(f"solver did not converge: {result.reason} (trace: {trace})", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- report


def load_reports(paths) -> list:
    from .verify import REPORT_VERSION, VerificationReport

    rows = []
    for p in paths:
        try:
            data = json.loads(Path(p).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read report {p}: {exc}") from None
        for d in data if isinstance(data, list) else [data]:
            if not isinstance(d, dict) or d.get("report_version") != REPORT_VERSION:
                got = d.get("report_version") if isinstance(d, dict) else None
                raise UsageError(f"{p}: report_version {got!r} is not {REPORT_VERSION}")
            rows.append(VerificationReport.from_dict(d).to_dict())
    return rows


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def summary_markdown(rows) -> str:
    lines = ["| " + " | ".join(SUMMARY_COLUMNS) + " |", "|" + "---|" * len(SUMMARY_COLUMNS)]
    for r in rows:
        lines.append("| " + " | ".join(fmt(r.get(c)).replace("|", "\\|") for c in SUMMARY_COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    rows = load_reports(args.inputs)
    d = out_dir(args.out)
    csv_path = atomic_write(d / "summary.csv", summary_csv(rows))
    md = summary_markdown(rows)
    md_path = atomic_write(d / "summary.md", md)
    RunManifest("report", {}, {"inputs": [str(p) for p in args.inputs]}, [str(csv_path), str(md_path)], list(args.argv)).write(d)
    print(md, end="")
    return 0


# ---------------------------------------------------------------- replay


def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        argv = list(manifest["argv"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    if args.out:
        argv = _replace_out(argv, args.out)
    return main(argv)


def _replace_out(argv, out):
    argv = list(argv)
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            argv[i + 1] = out
            return argv
        if a.startswith("--out="):
            argv[i] = f"--out={out}"
            return argv
    return argv + ["--out", out]


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    from .verify import DEFAULT_H

    p = argparse.ArgumentParser(prog="freebound", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"freebound {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run identity checks on an exact surface")
    v.add_argument("--surface", required=True, choices=SURFACES)
    v.add_argument("--dim", type=int, default=None, help="hypersurface dimension n (disk, rotational, cap)")
    v.add_argument("--cap-height", type=float, default=None)
    v.add_argument("--checks", default="all", help="comma-separated check names or 'all'")
    v.add_argument("--killing", default=None, help="Killing field: a basis name such as tz or rx, or 'skew=<m*m row-major>;translation=<m>' (default: translation along the last axis)")
    v.add_argument("--grid", type=int, default=24, help="interior samples per parameter axis")
    v.add_argument("--h", type=float, default=DEFAULT_H, help="relative finite-difference step")
    v.add_argument("--quad-points", type=int, default=None, help="Gauss-Legendre points per axis")
    v.add_argument("--jobs", type=int, default=1, help="checks run in parallel processes")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("solve", help="discrete free-boundary area minimisation")
    s.add_argument("--init", required=True, choices=("graph", "flat", "annulus"))
    s.add_argument("--height", default="0.2*x*(1-r^2)", help="height(r, x, y) for --init graph")
    s.add_argument("--res", type=int, default=32, help="rings of the disk, or vertices per boundary circle of the annulus")
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--grad-tol", type=float, default=1e-8)
    s.add_argument("--disp-tol", type=float, default=1e-8)
    s.add_argument("--metric", choices=("h1", "euclidean"), default="h1")
    s.add_argument("--boundary-motion", choices=("normal", "tangent"), default="normal")
    s.add_argument("--interior-motion", choices=("full", "normal"), default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("report", help="merge verification reports into CSV and markdown tables")
    r.add_argument("inputs", nargs="+", help="report JSON files written by verify")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", default=None)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    args.argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"freebound: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
