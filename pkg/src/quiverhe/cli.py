"""Command-line interface.

Commands: validate, stability, chambers, solve, props, report.
Exit codes: 0 success, 2 invalid input, 3 solver non-convergence or
blow-up, 4 property-sweep failure.  Machine reports land in --out
(default from QUIVERHE_OUT, else the working directory).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from .chambers import chamber_arrangement
from .endo import run_property_sweep
from .errors import (
    DimensionUnsupportedError,
    ModelValidationError,
    ProblemFileError,
    QuiverHEError,
)
from .geometry import dump_field_csv, make_sphere_grid
from .problem import input_digest, load_problem
from .quiver import P1
from .report import (
    Report,
    cells_csv,
    chambers_payload,
    classification_payload,
    render_human,
    solve_payload,
    walls_csv,
    write_text,
)
from .solver import SolveConfig, continuity_solve
from .stability import classify

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_SWEEP_FAILED = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quiverhe",
        description="Quiver-bundle stability, chambers, and Hermitian-Einstein solving",
    )
    parser.add_argument("--out", default=None,
                        help="output directory (default: $QUIVERHE_OUT or '.')")
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a problem file")
    p.add_argument("problem")

    p = sub.add_parser("stability", help="classify a problem file")
    p.add_argument("problem")

    p = sub.add_parser("chambers", help="walls and chamber cells in the tau-plane")
    p.add_argument("problem")
    p.add_argument("--box", nargs=4, default=["-3", "3", "-3", "3"],
                   metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
                   help="rational bounding box for the tau-plane")

    p = sub.add_parser("solve", help="run the continuity method")
    p.add_argument("problem")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--eps-ratio", type=float, default=None)
    p.add_argument("--eps-floor", type=float, default=None)
    p.add_argument("--max-newton", type=int, default=None)
    p.add_argument("--grid", default=None, metavar="NxM")
    p.add_argument("--blowup-threshold", type=float, default=None)
    p.add_argument("--dump-fields", default=None, metavar="DIR")

    p = sub.add_parser("props", help="seeded sweeps of the pointwise oracles")
    p.add_argument("--instances", type=int, default=10000)
    p.add_argument("--max-rank", type=int, default=4)
    p.add_argument("--max-vertices", type=int, default=4)

    p = sub.add_parser("report", help="re-render a stored machine report")
    p.add_argument("stored")
    p.add_argument("--format", choices=("human", "machine-json"), default="human")
    return parser


def _out_dir(args) -> Path:
    base = args.out or os.environ.get("QUIVERHE_OUT") or "."
    return Path(base)


def _emit(args, report: Report, elapsed: float, extra_files=()):
    outdir = _out_dir(args)
    stem = report.command
    machine = write_text(outdir / f"{stem}.report.json", report.machine_json())
    human_text = render_human(report.payload(), timing_seconds=elapsed)
    write_text(outdir / f"{stem}.report.txt", human_text)
    for name, text in extra_files:
        write_text(outdir / name, text)
    if not args.quiet:
        sys.stdout.write(human_text)
        sys.stdout.write(f"report: {machine}\n")


def _solver_config(problem, args) -> SolveConfig:
    cfg = SolveConfig()
    overrides = dict(problem.solver_overrides)
    for key, flag in (
        ("tol", "tol"), ("eps_ratio", "eps_ratio"), ("eps_floor", "eps_floor"),
        ("max_newton", "max_newton"), ("blowup_threshold", "blowup_threshold"),
    ):
        if getattr(args, flag, None) is not None:
            overrides[key] = getattr(args, flag)
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ProblemFileError(f"unknown solver option {key!r}")
        setattr(cfg, key, type(getattr(cfg, key))(value))
    cfg.__post_init__()
    return cfg


def _grid_for(problem, args):
    spec = problem.grid
    n_theta, n_phi = spec.n_theta, spec.n_phi
    if getattr(args, "grid", None):
        try:
            a, b = args.grid.lower().split("x")
            n_theta, n_phi = int(a), int(b)
        except ValueError:
            raise ProblemFileError(f"--grid wants NxM, got {args.grid!r}") from None
    return make_sphere_grid(n_theta, n_phi, spec.total_volume)


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    try:
        problem = load_problem(args.problem)
    except (ProblemFileError, ModelValidationError, QuiverHEError) as exc:
        errors = [str(e) for e in getattr(exc, "errors", [exc])]
        report = Report(command="validate", input_digest=None, seed=None,
                        outcome={"valid": False, "errors": errors})
        _emit(args, report, time.perf_counter() - t0)
        return EXIT_INVALID_INPUT
    report = Report(command="validate", input_digest=input_digest(problem),
                    seed=None, outcome={"valid": True, "errors": []})
    _emit(args, report, time.perf_counter() - t0)
    return EXIT_OK


def cmd_stability(args) -> int:
    t0 = time.perf_counter()
    problem = load_problem(args.problem)
    cls = classify(problem.model, problem.params)
    report = Report(command="stability", input_digest=input_digest(problem),
                    seed=None, outcome=classification_payload(cls))
    _emit(args, report, time.perf_counter() - t0)
    return EXIT_OK


def cmd_chambers(args) -> int:
    t0 = time.perf_counter()
    problem = load_problem(args.problem)
    box = [Fraction(b) for b in args.box]
    arr = chamber_arrangement(problem.model, problem.params.alpha,
                              problem.params.sigma, box)
    vertices = problem.model.quiver.vertices
    report = Report(command="chambers", input_digest=input_digest(problem),
                    seed=None, outcome=chambers_payload(arr, vertices))
    extra = [
        ("walls.csv", walls_csv(arr.walls, vertices)),
        ("cells.csv", cells_csv(arr.cells, vertices)),
    ]
    _emit(args, report, time.perf_counter() - t0, extra_files=extra)
    return EXIT_OK


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    problem = load_problem(args.problem)
    if problem.model.base != P1:
        raise ProblemFileError("solve runs on the P1 fixture only")
    config = _solver_config(problem, args)
    grid = _grid_for(problem, args)
    state, solve_rep = continuity_solve(problem.model, problem.params, config, grid)
    report = Report(command="solve", input_digest=input_digest(problem),
                    seed=None, outcome=solve_payload(solve_rep, state))
    _emit(args, report, time.perf_counter() - t0)
    if args.dump_fields:
        dump_dir = Path(args.dump_fields)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for v, field in state.u.items():
            dump_field_csv(dump_dir / f"u_{v}.csv", grid, field)
    return EXIT_OK if solve_rep.outcome == "Converged" else EXIT_NOT_CONVERGED


def cmd_props(args) -> int:
    t0 = time.perf_counter()
    summary = run_property_sweep(seed=args.seed, instances=args.instances,
                                 max_vertices=args.max_vertices,
                                 max_rank=args.max_rank)
    report = Report(command="props", input_digest=None, seed=args.seed,
                    outcome=summary)
    _emit(args, report, time.perf_counter() - t0)
    if not summary["passed"]:
        failing = Report(command="props-failures", input_digest=None, seed=args.seed,
                         outcome={"failures": summary["failures"]})
        write_text(_out_dir(args) / "props.failures.json", failing.machine_json())
        return EXIT_SWEEP_FAILED
    return EXIT_OK


def cmd_report(args) -> int:
    import json

    try:
        payload = json.loads(Path(args.stored).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemFileError(f"cannot load stored report: {exc}") from None
    if args.format == "machine-json":
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(render_human(payload))
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "stability": cmd_stability,
    "chambers": cmd_chambers,
    "solve": cmd_solve,
    "props": cmd_props,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ProblemFileError, ModelValidationError, DimensionUnsupportedError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID_INPUT
    except QuiverHEError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
