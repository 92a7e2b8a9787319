"""Command-line interface.

Exit codes: 0 success / consistent, 2 usage or data error, 3 non-existence
detected (or a baseline check failed), 4 inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .hausdorff import check_lp, check_markov
from .hierarchy import (
    LOCALIZING_CONVENTION,
    HierarchyConfig,
    assemble_dual,
    assemble_level,
    interpret,
    run_detection,
)
from .measures import (
    IncompleteMomentsError,
    MixtureScenario,
    MomentVector,
    box_lebesgue_moments,
    density_moments,
    mixture_moments,
)
from .polybasis import Polynomial, SemialgebraicSet
from .sdp import SolverConfig
from .sdp.dump import dump_problem
from . import tables

EXIT_OK, EXIT_USAGE, EXIT_DETECTED, EXIT_INCONCLUSIVE = 0, 2, 3, 4

CONCLUSION_EXIT = {"ConsistentUpTo": EXIT_OK, "NoDensityFrom": EXIT_DETECTED,
                   "Inconclusive": EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


class Manifest:
    """Provenance record embedded in every emitted report."""

    def __init__(self, argv: Sequence[str]):
        self.command = list(argv)
        self.inputs: dict[str, str] = {}
        self.stages: dict[str, float] = {}
        self.tolerances: dict = {}

    def digest(self, path: str, data: bytes) -> None:
        self.inputs[path] = "sha256:" + hashlib.sha256(data).hexdigest()

    def timed(self, stage: str):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                manifest.stages[stage] = round(time.perf_counter() - self.start, 4)

        return _Timer()

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "input_digests": self.inputs,
            "tolerances": self.tolerances,
            "localizing_order_convention": LOCALIZING_CONVENTION,
            "version": __version__,
            "seconds": self.stages,
        }


def _read_json(path: str, manifest: Manifest) -> dict:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    manifest.digest(path, data)
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_moments(path: str, manifest: Manifest) -> MomentVector:
    try:
        return MomentVector.from_json(_read_json(path, manifest))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, IncompleteMomentsError):
            raise
        raise UsageError(f"{path} is not a moment vector: {exc}") from exc


def _load_set(path: str, manifest: Manifest) -> SemialgebraicSet:
    try:
        return SemialgebraicSet.from_json(_read_json(path, manifest))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path} is not a semi-algebraic set: {exc}") from exc


def _solver_config(args) -> SolverConfig:
    return SolverConfig(feas_tol=args.tol, infeas_threshold=args.infeas_eps)


def cmd_scenario(args, manifest: Manifest) -> int:
    box = [(0.0, 1.0)]
    if args.order < 0:
        raise UsageError("--order must be non-negative")
    if args.kind == "dirac-mix":
        atoms = args.s or []
        a = 1.0 if args.a is None else args.a
        if a < 1.0 and not atoms:
            raise UsageError("dirac-mix with a < 1 needs at least one --s")
        share = 1.0 / len(atoms) if atoms else 0.0
        try:
            scenario = MixtureScenario(a, tuple(((s,), share) for s in atoms))
            y = mixture_moments(scenario, box, args.order)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        echo = {"kind": "dirac-mix", **scenario.to_json()}
    else:
        if not args.coeffs:
            raise UsageError("poly-density needs --coeffs")
        density = Polynomial.univariate(_floats(args.coeffs))
        y = density_moments(density, box, args.order)
        mass = float(y.exact[(0,)])
        if abs(mass - 1.0) > 1e-12:
            raise UsageError(f"density integrates to {mass:g} on [0,1], expected 1")
        echo = {"kind": "poly-density", "density": density.to_json()}
    out = y.to_json()
    out["scenario"] = echo
    out["box"] = [list(iv) for iv in box]
    out["manifest"] = manifest.to_json()
    _write(json.dumps(out, indent=1) + "\n", args.out)
    return EXIT_OK


def _level_table(report) -> str:
    lines = [f"{'d':>3} {'order':>5} {'status':<14} {'margin':>12} {'rho_d':>14} {'sec':>7}"]
    for lv in report.levels:
        rho = "" if lv.rho is None else f"{lv.rho:.8g}"
        margin = "" if lv.margin is None else f"{lv.margin:.4g}"
        lines.append(
            f"{lv.d:>3} {2 * lv.d:>5} {lv.status:<14} {margin:>12} {rho:>14} {lv.seconds:>7.2f}"
            + (f"  {lv.reason}" if lv.reason else "")
        )
    return "\n".join(lines)


def cmd_detect(args, manifest: Manifest) -> int:
    kset = _load_set(args.set, manifest)
    y = _load_moments(args.moments, manifest)
    if args.gamma:
        gamma = _load_moments(args.gamma, manifest)
    else:
        gamma = box_lebesgue_moments(kset.box, 2 * args.dmax)
    solver = _solver_config(args)
    manifest.tolerances = solver.to_json()
    config = HierarchyConfig(dmax=args.dmax, solver=solver, linf_bound=args.linf_bound,
                             run_all=args.run_all)
    inputs = {"set": kset.to_json(), "moments_file": args.moments,
              "moments": {"nvars": y.nvars, "max_order": y.max_order}}
    with manifest.timed("detect"):
        report = run_detection(kset, gamma, y, config, inputs)
    payload = report.to_json()
    payload["manifest"] = manifest.to_json()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1) + "\n")
    print(_level_table(report))
    print(interpret(report))
    if report.monotonicity_violation:
        print("warning: a level after an infeasible one was reported feasible", file=sys.stderr)
    return CONCLUSION_EXIT[report.conclusion.kind]


def _weights(text: str | None) -> tuple[float, ...]:
    if not text:
        return tables.DEFAULT_WEIGHTS
    if ":" in text:
        lo, hi, step = _floats(text.replace(":", ","))
        count = int(round((hi - lo) / step)) + 1
        return tuple(round(lo + i * step, 10) for i in range(count))
    return tuple(_floats(text))


def cmd_table(args, manifest: Manifest) -> int:
    levels = tables.TABLE_LEVELS[args.which]
    if args.dmax is not None:
        levels = tuple(d for d in range(min(levels), args.dmax + 1))
        if not levels:
            raise UsageError(f"--dmax {args.dmax} leaves no levels")
    weights = _weights(args.weights)
    solver = _solver_config(args)
    manifest.tolerances = solver.to_json()
    with manifest.timed("sweep"):
        cells = tables.sweep(tables.table_rows(args.which), weights, levels, solver, args.jobs)
    summary = tables.summarise(cells, levels)
    title = "One Dirac" if args.which == 1 else "Two Diracs"
    markdown = tables.to_markdown(summary, levels, title)
    markdown += "\n<!-- manifest: " + json.dumps(manifest.to_json()) + " -->\n"
    _write(markdown, args.out_md)
    if args.out_csv:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerows(tables.to_csv_rows(summary, levels))
        Path(args.out_csv).write_text(buf.getvalue())
    if args.out_json:
        detail = {
            "cells": [c.__dict__ for c in cells],
            "summary": summary,
            "manifest": manifest.to_json(),
        }
        Path(args.out_json).write_text(json.dumps(detail, indent=1) + "\n")
    return EXIT_OK


def _univariate_sequence(y: MomentVector) -> list:
    if y.nvars != 1:
        raise UsageError(f"the finite-difference checks need univariate moments, got nvars={y.nvars}")
    exact = y.univariate_exact()
    return exact if exact is not None else y.univariate()


def cmd_hausdorff(args, manifest: Manifest) -> int:
    y = _load_moments(args.moments, manifest)
    seq = _univariate_sequence(y)
    n_max = min(args.n_max, len(seq) - 1)
    manifest.tolerances = {"difference_tolerance": 1e-10,
                           "exact": isinstance(seq[0], Fraction)}
    report: dict = {"n_max": n_max}
    with manifest.timed("markov"):
        markov = check_markov(seq, args.c, n_max)
    report["markov"] = {"c": args.c, **_result_json(markov)}
    ok = markov.passed
    if args.p is not None:
        with manifest.timed("lp"):
            lp = check_lp(seq, args.p, args.c, n_max)
        report["lp"] = {"p": args.p, "c": args.c, **_result_json(lp)}
        ok = ok and lp.passed
    report["manifest"] = manifest.to_json()
    text = json.dumps(report, indent=1) + "\n"
    _write(text, args.out)
    return EXIT_OK if ok else EXIT_DETECTED


def _result_json(res) -> dict:
    return {"passed": res.passed, "where": res.where, "value": res.value, "reason": res.reason,
            "rows_checked": res.rows_checked}


def cmd_dump(args, manifest: Manifest) -> int:
    kset = _load_set(args.set, manifest)
    y = _load_moments(args.moments, manifest)
    gamma = box_lebesgue_moments(kset.box, 2 * args.d)
    if args.dual:
        problem = assemble_dual(kset, gamma, y, args.d)
    else:
        problem = assemble_level(kset, gamma, y, args.d, args.linf_bound).primal
    buf = io.StringIO()
    dump_problem(problem, buf)
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentdensity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="write the moment vector of a test scenario")
    p.add_argument("kind", choices=["dirac-mix", "poly-density"])
    p.add_argument("--s", type=float, action="append",
                   help="atom location; repeat for several equal-mass atoms")
    p.add_argument("--a", type=float, help="weight of the uniform part (default 1)")
    p.add_argument("--coeffs", help="density coefficients c0,c1,... of c0 + c1 x + ...")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)

    def solver_flags(q):
        q.add_argument("--tol", type=float, default=1e-8, help="feasibility tolerance")
        q.add_argument("--infeas-eps", type=float, default=1e-6,
                       help="phase-1 margin above which a level is infeasible")

    p = sub.add_parser("detect", help="run the hierarchy on a moment vector")
    p.add_argument("set")
    p.add_argument("moments")
    p.add_argument("--gamma", help="Lebesgue moments of K (default: uniform on the box)")
    p.add_argument("--dmax", type=int, required=True)
    p.add_argument("--linf-bound", type=float)
    p.add_argument("--run-all", action="store_true", help="do not stop at the first infeasible level")
    p.add_argument("--out")
    solver_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("table", help="sweep the Dirac-mixture grid")
    p.add_argument("which", type=int, choices=[1, 2])
    p.add_argument("--dmax", type=int)
    p.add_argument("--weights", help="lo:hi:step or a comma list (default 0.1..1.0)")
    p.add_argument("--jobs", type=int, help=f"worker processes (default ${tables.WORKERS_ENV})")
    p.add_argument("--out-md")
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    solver_flags(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("hausdorff", help="finite-difference checks on [0,1]")
    p.add_argument("moments")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--n-max", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hausdorff)

    p = sub.add_parser("dump-problem", help="write one level as a conic text file")
    p.add_argument("set")
    p.add_argument("moments")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--linf-bound", type=float)
    p.add_argument("--dual", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    manifest = Manifest(["momentdensity"] + argv)
    try:
        return args.func(args, manifest)
    except IncompleteMomentsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
