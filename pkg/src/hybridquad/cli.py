"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, bench
from .elements import SingularBubbleBlock, SingularH
from .mesh import MeshError, mesh_to_text
from .solver import ELEMENT_KINDS, SolverError, solve_problem, solution_to_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, example=True, element=True) -> None:
    if example:
        p.add_argument("--example", type=int, choices=(1, 2, 3), default=1)
    if element:
        p.add_argument("--element", choices=ELEMENT_KINDS, default="ps")
    p.add_argument("--mesh-family", choices=bench.MESH_FAMILIES, default="regular")
    p.add_argument("--level", type=int, default=0, help="refinement level; level L is (5*2^L) x 2^L")
    p.add_argument("--nu", type=float, default=0.25)
    p.add_argument("--E", type=float, default=bench.DEFAULT_E)
    p.add_argument("--out", type=Path, help="write here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridquad", description="Hybrid stress quadrilateral benchmarks.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("mesh", help="generate a beam mesh")
    _common(p, example=False, element=False)
    p.add_argument(
        "--dirichlet",
        default="left",
        help="comma separated clamped sides (left,right,bottom,top)",
    )

    p = sub.add_parser("run", help="solve one benchmark case")
    _common(p)
    p.add_argument("--solution", type=Path, help="also write the solution JSON here")
    p.add_argument("--no-estimator", action="store_true")

    p = sub.add_parser("table", help="reproduce a benchmark table")
    p.add_argument("table_id", type=int, choices=range(1, 13), metavar="id")
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("sweep", help="convergence study over refinement levels")
    _common(p)
    p.add_argument("--min-level", type=int, default=None, help="default 1 for example 3, else 0")

    p = sub.add_parser("estimate", help="per-element estimator map")
    _common(p)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _case(args) -> bench.BenchmarkCase:
    try:
        return bench.BenchmarkCase(args.example, args.element, args.mesh_family, args.level, args.nu, args.E)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _material_check(args) -> None:
    if not 0.0 < args.nu < 0.5:
        raise UsageError(f"--nu must lie in (0, 0.5), got {args.nu}")
    if args.E <= 0:
        raise UsageError(f"--E must be positive, got {args.E}")
    if args.level < 0:
        raise UsageError("--level must be >= 0")


def _json(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, list):
            return [clean(x) for x in v]
        return v

    return json.dumps(clean(obj), indent=1) + "\n"


def cmd_mesh(args) -> int:
    if args.level < 0:
        raise UsageError("--level must be >= 0")
    sides = tuple(s.strip() for s in args.dirichlet.split(",") if s.strip())
    bad = [s for s in sides if s not in ("left", "right", "bottom", "top")]
    if bad:
        raise UsageError(f"unknown side(s) {bad}")
    mesh = bench.build_mesh(args.mesh_family, args.level, sides)
    if args.format == "json":
        payload = {
            "nodes": mesh.nodes.tolist(),
            "elements": mesh.elements.tolist(),
            "labels": [[a, b, str(lab)] for (a, b), lab in mesh.boundary_labels().items()],
        }
        _emit(_json(payload), args.out)
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["element", "n0", "n1", "n2", "n3"])
        for k, e in enumerate(mesh.elements.tolist()):
            w.writerow([k, *e])
        _emit(buf.getvalue(), args.out)
    else:
        _emit(mesh_to_text(mesh), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    _material_check(args)
    case = _case(args)
    row = bench.run_case(case, with_estimator=not args.no_estimator)
    if args.solution is not None:
        spec, _ = bench.problem_spec(case)
        args.solution.write_text(solution_to_json(solve_problem(spec)))
    if args.format == "csv":
        _emit(bench.rows_to_csv([row]), args.out)
    else:
        _emit(_json(row.to_dict()), args.out)
    return EXIT_OK


def cmd_table(args) -> int:
    cells = bench.table_cells(args.table_id)
    if args.format == "json":
        _emit(_json([c.to_dict() for c in cells]), args.out)
    else:
        _emit(bench.cells_to_csv(cells), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _material_check(args)
    lo = args.min_level if args.min_level is not None else (1 if args.example == 3 else 0)
    hi = args.level if args.level > lo else lo + 3
    rows = []
    for lv in range(lo, hi + 1):
        args.level = lv
        rows.append(bench.run_case(_case(args), with_estimator=False))
    disp = analysis.convergence_rates([r.e_disp_rel for r in rows])
    stress_vals = [r.e_stress_rel for r in rows]
    stress = analysis.convergence_rates(stress_vals) if min(stress_vals) > 1e-9 else [math.nan] * len(disp)
    out = []
    for i, r in enumerate(rows):
        d = r.to_dict()
        d["rate_disp"] = disp[i - 1] if i else math.nan
        d["rate_stress"] = stress[i - 1] if i else math.nan
        out.append(d)
    if args.format == "json":
        _emit(_json(out), args.out)
    else:
        buf = io.StringIO()
        fields = list(out[0])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for d in out:
            w.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in d.values()])
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    _material_check(args)
    case = _case(args)
    spec, exact = bench.problem_spec(case)
    sol = solve_problem(spec)
    est = analysis.estimator(sol, spec)
    centers = spec.mesh.corners().mean(axis=1)
    if args.format == "json":
        payload = est.to_dict()
        payload["per_element"] = [
            {"element": k, "x": float(c[0]), "y": float(c[1]), "volume": float(v[0]), "constitutive": float(v[1]), "jump": float(v[2])}
            for k, (c, v) in enumerate(zip(centers, est.per_element))
        ]
        _emit(_json(payload), args.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["element", "x", "y", "volume", "constitutive", "jump", "total"])
        for k, (c, v) in enumerate(zip(centers, est.per_element)):
            w.writerow([k, f"{c[0]:.6g}", f"{c[1]:.6g}", *(f"{x:.6g}" for x in v), f"{np.sum(v):.6g}"])
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


COMMANDS = {"mesh": cmd_mesh, "run": cmd_run, "table": cmd_table, "sweep": cmd_sweep, "estimate": cmd_estimate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, SingularH, SingularBubbleBlock, np.linalg.LinAlgError, FloatingPointError, MeshError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
