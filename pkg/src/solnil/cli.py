"""Command-line front end.

Exit codes: 0 success, 1 scan found a cell at or below the threshold,
2 domain / integration / I/O failure, 3 parse or usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import charts, curves, maps, scan
from .errors import ParseError, SolNilError

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_SCAN_FAIL = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma list; empty text gives []."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise UsageError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(n, 0))]
    return _floats(text, "grid")


def parse_helix(text: str) -> tuple[float, float]:
    vals = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"--helix expects k=<num>,tau=<num>, got {text!r}")
        try:
            vals[key.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--helix: bad number {val!r}") from None
    if set(vals) != {"k", "tau"}:
        raise UsageError("--helix needs exactly k and tau")
    return vals["k"], vals["tau"]


def parse_init(text: str) -> curves.FrenetState:
    text = text.strip()
    if text == "default":
        return curves.initial_state()
    key, sep, val = text.partition("=")
    if sep and key == "euler":
        ang = _floats(val, "--init euler")
        if len(ang) != 3:
            raise UsageError("--init euler needs three angles")
        return curves.initial_state(euler=ang)
    if sep and key == "T":
        t = _floats(val, "--init T")
        if len(t) != 3 or not np.linalg.norm(t) > 0:
            raise UsageError("--init T needs a nonzero 3-vector")
        return curves.initial_state(T=t)
    raise UsageError(f"--init must be default, euler=a,b,c or T=t1,t2,t3, got {text!r}")


def parse_orientations(text: str) -> list[tuple[float, float, float]]:
    text = text.strip()
    if text == "default":
        return [(0.0, 0.0, 0.0)]
    if text.isdigit():
        n = int(text)
        if n < 1:
            raise UsageError("--orientations count must be positive")
        return scan.orientation_grid(n)
    out = []
    for chunk in text.split(";"):
        ang = _floats(chunk, "--orientations")
        if len(ang) != 3:
            raise UsageError("each orientation needs three Euler angles")
        out.append(tuple(ang))
    return out


def _chart(args) -> charts.ChartMetric:
    try:
        return charts.get_chart(args.chart, args.dim)
    except FileNotFoundError as exc:
        raise UsageError(f"no such chart or config file: {args.chart}") from exc


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit_json(doc: dict, out=None) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    text = json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
    (out or sys.stdout).write(text)


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def _entries_text(title: str, arr: np.ndarray, label: str) -> list[str]:
    lines = [title]
    nz = charts.nonzero_entries(arr)
    if not nz:
        lines.append("  (all zero)")
    for idx, val in nz:
        lines.append(f"  {label(idx)} = {_fmt(val)}")
    return lines


# ---------------------------------------------------------------------------
# subcommands


def cmd_curvature(args) -> int:
    chart = _chart(args)
    p = _floats(args.point, "--point") if args.point else [0.0] * chart.dim
    if len(p) != chart.dim:
        raise UsageError(f"--point needs {chart.dim} coordinates")
    p = np.array(p)
    g = charts.metric_at(chart, p)
    gam = charts.christoffel_at(chart, p)
    rm = charts.riemann_mixed_at(chart, p)
    rf = charts.riemann_frame_at(chart, None, p)
    if args.format == "json":
        _emit_json({
            "command": "curvature", "chart": chart.name, "dim": chart.dim, "point": p,
            "metric": g, "christoffel": gam, "riemann_mixed": rm, "riemann_frame": rf,
            "nonzero": {
                "christoffel": [[list(i), v] for i, v in charts.nonzero_entries(gam)],
                "riemann_mixed": [[list(i), v] for i, v in charts.nonzero_entries(rm)],
                "riemann_frame": [[list(i), v] for i, v in charts.nonzero_entries(rf)],
            },
        })
        return EXIT_OK
    if args.format == "csv":
        raise UsageError("curvature supports text or json output")
    lines = [f"chart {chart.name} (dim {chart.dim}) at point ({', '.join(_fmt(v) for v in p)})"]
    lines += _entries_text("metric g_ij:", g, lambda i: f"g{i[0]}{i[1]}")
    lines += _entries_text("Christoffel symbols Gamma^k_ij:", gam,
                           lambda i: f"Gamma^{i[0]}_{i[1]}{i[2]}")
    lines += _entries_text("curvature R^l_kij:", rm,
                           lambda i: f"R^{i[0]}_{i[1]}{i[2]}{i[3]}")
    lines += _entries_text("frame curvature R_abcd = R(e_a, e_b, e_c, e_d):", rf,
                           lambda i: "R" + "".join(str(v) for v in i))
    print("\n".join(lines))
    return EXIT_OK


def _curve_reports(traj, args):
    reports = {
        "frame": curves.biharmonic_residual_frame(traj, args.tol_frame),
        "direct": curves.biharmonic_residual_direct(traj, args.tol_direct),
    }
    if traj.chart.name == "sol":
        reports["sol_condition"] = curves.sol_condition_residual(traj, args.tol_sol)
    return reports


def cmd_check_curve(args) -> int:
    chart = _chart(args)
    if (args.helix is None) == (args.csv is None):
        raise UsageError("check-curve needs exactly one of --helix or --csv")
    if args.csv is not None:
        try:
            s, pos = curves.read_trajectory_csv(args.csv)
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad trajectory file {args.csv}: {exc}") from exc
        if len(s) < 2:
            raise ParseError("trajectory file needs at least two samples")
        ds = float(np.mean(np.diff(s)))
        if not np.allclose(np.diff(s), ds, rtol=1e-6, atol=1e-12):
            raise ParseError("trajectory samples must be uniform in s")
        traj = curves.frenet_apparatus(chart, pos, ds)
        source = {"csv": args.csv}
    else:
        k, tau = parse_helix(args.helix)
        init = parse_init(args.init)
        traj = curves.integrate_helix(chart, k, tau, init, args.smax, args.steps)
        source = {"helix": {"k": k, "tau": tau}, "init": args.init,
                  "s_max": args.smax, "steps": args.steps}
    if args.out:
        traj.to_csv(args.out)
    reports = _curve_reports(traj, args)
    if args.format == "json":
        _emit_json({"command": "check-curve", "chart": chart.name, "source": source,
                    "drift": traj.drift, "reports": {k: r.to_dict() for k, r in reports.items()}})
        return EXIT_OK
    if args.format == "csv":
        raise UsageError("check-curve supports text or json output (use --out for the trajectory)")
    print(f"chart {chart.name}, {len(traj)} samples, ds = {_fmt(traj.ds)}, frame drift {traj.drift:.3g}")
    print(f"{'method':<14} {'sup_norm':>14} {'tol':>8}  {'components':<44} verdict")
    for name, r in reports.items():
        comps = ", ".join(f"{v:.4g}" for v in r.component_sups)
        flag = f" ({', '.join(r.flags)})" if r.flags else ""
        print(f"{name:<14} {r.sup_norm:>14.6g} {r.tol:>8.0e}  [{comps:<42}] {r.verdict}{flag}")
    return EXIT_OK


def _load_map(args) -> maps.LinearMap:
    if not args.map_file:
        raise UsageError("--map-file is required")
    return maps.load_map(args.map_file)


def cmd_classify(args) -> int:
    phi = _load_map(args)
    verdict = maps.classify(phi)
    report = maps.residual_report(phi, tol=args.tol_map, seed=args.seed)
    if args.format == "json":
        _emit_json({"command": "classify", "map": phi.to_dict(), "verdict": verdict.to_dict(),
                    "residual": {**report.to_dict(), "probes": report.probes,
                                 "per_component": report.per_component}})
        return EXIT_OK
    if args.format == "csv":
        raise UsageError("classify supports text or json output")
    print(f"target {phi.target}, m = {phi.m}")
    print(verdict.describe())
    print("witnesses: " + ", ".join(f"{k} = {_fmt(v)}" for k, v in verdict.witnesses.items()))
    print(f"closed-form residual sup over {len(report.probes)} probes: {report.sup_norm:.6g} "
          f"(tol {report.tol:g}) -> {report.verdict}")
    origin = report.per_component[0]
    print("residual at origin: (" + ", ".join(_fmt(v) for v in origin) + ")")
    return EXIT_OK


def cmd_check_map(args) -> int:
    phi = _load_map(args)
    x = _floats(args.point, "--point") if args.point else [0.0] * phi.m
    if len(x) != phi.m:
        raise UsageError(f"--point needs {phi.m} coordinates")
    x = np.array(x)
    tension = maps.tension_linear(phi, x)
    bitension = maps.bitension_numeric(phi, x, h=args.h, method=args.method)
    closed = maps.residual_closed(phi, x)
    diff = float(np.max(np.abs(bitension - closed)))
    if args.format == "json":
        _emit_json({"command": "check-map", "map": phi.to_dict(), "point": x, "h": args.h,
                    "method": args.method, "tension": tension, "bitension": bitension,
                    "closed_form": closed, "max_abs_difference": diff})
        return EXIT_OK
    if args.format == "csv":
        raise UsageError("check-map supports text or json output")
    vec = lambda v: "(" + ", ".join(_fmt(c) for c in v) + ")"
    print(f"target {phi.target}, point {vec(x)}, image {vec(phi(x))}")
    print(f"tension      {vec(tension)}")
    print(f"bitension    {vec(bitension)}  [{args.method}, h = {args.h:g}]")
    print(f"closed form  {vec(closed)}")
    print(f"max |bitension - closed form| = {diff:.3g}")
    return EXIT_OK


def cmd_scan_helices(args) -> int:
    ks = parse_grid(args.k_grid)
    taus = parse_grid(args.tau_grid)
    orients = parse_orientations(args.orientations)
    if not ks or not taus or not orients:
        raise UsageError("scan grids must be nonempty")
    if any(not k > 0 for k in ks):
        raise UsageError("all k in the grid must be positive")
    report = scan.helix_scan(ks, taus, orients, s_max=args.smax, steps=args.steps,
                             threshold=args.threshold, workers=args.workers)
    if args.out:
        report.to_csv(args.out)
    summary = report.summary()
    if args.format == "json":
        _emit_json({"command": "scan-helices", "summary": summary, "out": args.out})
    elif args.format == "csv":
        if args.out:
            raise UsageError("--format csv writes to stdout; drop --out or use text/json")
        import csv
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(scan.CSV_COLUMNS)
        for row in report.rows():
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])
    else:
        print(f"scanned {summary['cells']} cells {summary['flags']}; "
              f"global min residual {report.global_min:.6g}; "
              f"{summary['cells_below_threshold']} at or below threshold {args.threshold:g}")
    return EXIT_OK if report.passed else EXIT_SCAN_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="solnil", description="Curvature, biharmonic curves and maps in Sol and Nil.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, chart=True):
        if chart:
            p.add_argument("--chart", default="sol", help="sol, nil, euclidean or a TOML chart file")
            p.add_argument("--dim", type=int, default=3, help="dimension of the euclidean chart")
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("curvature", help="Christoffel and curvature tables at a point")
    common(p)
    p.add_argument("--point", default=None, help="comma-separated coordinates (default origin)")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("check-curve", help="biharmonic residuals of a helix or sampled curve")
    common(p)
    p.add_argument("--helix", default=None, help="k=<num>,tau=<num>")
    p.add_argument("--csv", default=None, help="trajectory CSV with columns s,x,y,z")
    p.add_argument("--init", default="default", help="default | euler=a,b,c | T=t1,t2,t3")
    p.add_argument("--smax", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--out", default=None, help="write the trajectory CSV here")
    p.add_argument("--tol-frame", type=float, default=curves.TOL_FRAME)
    p.add_argument("--tol-direct", type=float, default=curves.TOL_DIRECT)
    p.add_argument("--tol-sol", type=float, default=curves.TOL_SOL)
    p.set_defaults(func=cmd_check_curve)

    p = sub.add_parser("classify", help="classify a linear map into Sol or Nil")
    common(p, chart=False)
    p.add_argument("--map-file", default=None)
    p.add_argument("--tol-map", type=float, default=maps.TOL_MAP)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("check-map", help="raw tension and bitension of a linear map at a point")
    common(p, chart=False)
    p.add_argument("--map-file", default=None)
    p.add_argument("--point", default=None)
    p.add_argument("--h", type=float, default=1e-4, help="finite-difference step")
    p.add_argument("--method", choices=("auto", "fd"), default="auto")
    p.set_defaults(func=cmd_check_map)

    p = sub.add_parser("scan-helices", help="grid scan for biharmonic helices in Sol")
    common(p, chart=False)
    p.add_argument("--k-grid", default="0.1:2.0:0.1")
    p.add_argument("--tau-grid", default="0.1:2.0:0.1")
    p.add_argument("--orientations", default="4",
                   help="n for an n^3 Euler grid, 'default', or 'a,b,c;a,b,c'")
    p.add_argument("--smax", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=1e-2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_scan_helices)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError) as exc:
        print(f"solnil: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolNilError, OSError, ValueError, NotImplementedError) as exc:
        print(f"solnil: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
