"""``kkt-sense`` command-line front end.

Exit codes: 0 success, 1 input error, 2 solver did not converge,
3 singular KKT Jacobian, 4 finite-difference check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys

import numpy as np

from .fd_oracle import DEFAULT_STEP, FD_SOLVE_TOL, compare, fd_jacobian
from .kkt import OracleError
from .problem_io import ProblemFile, ProblemFileError, emit_problem, generate_problem, load_problem
from .sensitivity import Singular, directional_sensitivity, solution_jacobian
from .solver import SolverConfig, SolverError, solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_SINGULAR = 3
EXIT_CHECK_FAILED = 4

CHECK_TOL = 1e-4
TOL_ENV = "KKT_SENSE_TOL"
DEGENERATE_SKIP = "degenerate: FD comparison skipped"

REPORT_KEYS = {
    "solve": {"x", "lambda", "nu", "optimal_value", "kkt_norm", "iters", "converged", "degeneracy"},
    "jacobian": {"x", "lambda", "nu", "optimal_value", "kkt_norm", "iters", "converged", "degeneracy",
                 "jac_x", "jac_lambda", "jac_nu", "condition_estimate", "hypotheses_ok"},
    "check": {"converged", "degeneracy", "hypotheses_ok", "max_rel_err", "worst_entry",
              "per_column_solve_failures", "passed"},
}

logger = logging.getLogger("kkt_sense")


class InputError(Exception):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def format_report(report: dict) -> str:
    """One top-level field per line, arrays inline, full float precision."""
    lines = [f"  {json.dumps(k)}: {json.dumps(v, allow_nan=False)}"
             for k, v in _jsonable(report).items()]
    return "{\n" + ",\n".join(lines) + "\n}\n"


def _write(report: dict) -> None:
    sys.stdout.write(format_report(report))


def _config_for(pf: ProblemFile) -> SolverConfig:
    kwargs = {}
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            kwargs["tol"] = float(env)
        except ValueError:
            raise InputError(f"{TOL_ENV}: not a number: {env!r}", TOL_ENV) from None
    kwargs.update(pf.solver)
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise InputError(f"solver: {exc}", "solver") from exc


def _load(path: str) -> ProblemFile:
    try:
        return load_problem(path)
    except ProblemFileError as exc:
        raise InputError(f"{path}: {exc}", exc.field) from exc


def _solution_report(sol) -> dict:
    return {
        "x": sol.point.x,
        "lambda": sol.point.lam,
        "nu": sol.point.nu,
        "optimal_value": sol.optimal_value,
        "kkt_norm": sol.kkt_norm,
        "iters": sol.iters,
        "converged": sol.converged,
        "status": sol.status,
        "degeneracy": sol.degeneracy.to_dict(),
    }


def _solve(pf: ProblemFile, config: SolverConfig, report: dict):
    prog = pf.program()
    try:
        sol = solve(prog, pf.theta, config)
    except (SolverError, OracleError) as exc:
        report.update(converged=False, status=type(exc).__name__, error=str(exc))
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return prog, None
    report.update(_solution_report(sol))
    if not sol.converged:
        print(f"error: solver did not converge in {sol.iters} iterations "
              f"(KKT residual {sol.kkt_norm:.3e})", file=sys.stderr)
        return prog, None
    return prog, sol


def _hypothesis_warning(res) -> str | None:
    if res.hypotheses_ok:
        return None
    if not res.degeneracy.strictly_complementary:
        return (f"strict complementarity fails at constraints {res.degeneracy.weakly_active}; "
                "the Jacobian may be one-sided and should not be trusted")
    return f"KKT residual {res.kkt_norm:.3e} above tolerance at the solution"


def cmd_solve(args) -> int:
    pf = _load(args.file)
    report = {"command": "solve"}
    _, sol = _solve(pf, _config_for(pf), report)
    _write(report)
    return EXIT_OK if sol is not None else EXIT_NOT_CONVERGED


def _parse_direction(text: str, d: int) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise InputError(f"--directional: not a comma-separated list of numbers: {text!r}",
                         "directional") from None
    if v.shape != (d,):
        raise InputError(f"--directional: expected {d} components, got {v.size}", "directional")
    return v


def cmd_jacobian(args) -> int:
    pf = _load(args.file)
    config = _config_for(pf)
    direction = None
    if args.directional is not None:
        direction = _parse_direction(args.directional, len(pf.theta))
    report = {"command": "jacobian"}
    prog, sol = _solve(pf, config, report)
    if sol is None:
        _write(report)
        return EXIT_NOT_CONVERGED
    try:
        res = solution_jacobian(prog, sol, pf.theta, tol=config.tol)
    except Singular as exc:
        report.update(error=str(exc), status="singular", pivot_ratio=exc.pivot_ratio)
        print(f"error: {exc}", file=sys.stderr)
        _write(report)
        return EXIT_SINGULAR
    report.update(
        jac_x=res.jac_x,
        jac_lambda=res.jac_lambda,
        jac_nu=res.jac_nu,
        condition_estimate=res.condition_estimate,
        hypotheses_ok=res.hypotheses_ok,
        linear_residual=res.linear_residual,
    )
    warning = _hypothesis_warning(res)
    if warning:
        report["warning"] = warning
        print(f"warning: {warning}", file=sys.stderr)
    if direction is not None:
        ds = directional_sensitivity(prog, sol, pf.theta, direction, tol=config.tol)
        report["directional"] = {"direction": direction, "dx": ds.dx,
                                 "dlambda": ds.dlambda, "dnu": ds.dnu}
    _write(report)
    return EXIT_OK


def cmd_check(args) -> int:
    pf = _load(args.file)
    config = _config_for(pf)
    if not args.step > 0:
        raise InputError(f"--step must be positive, got {args.step!r}", "step")
    report = {"command": "check"}
    prog, sol = _solve(pf, config, report)
    if sol is None:
        _write(report)
        return EXIT_NOT_CONVERGED
    try:
        res = solution_jacobian(prog, sol, pf.theta, tol=config.tol)
    except Singular as exc:
        report.update(error=str(exc), status="singular", pivot_ratio=exc.pivot_ratio)
        print(f"error: {exc}", file=sys.stderr)
        _write(report)
        return EXIT_SINGULAR
    report.update(hypotheses_ok=res.hypotheses_ok, jac_x=res.jac_x,
                  condition_estimate=res.condition_estimate)
    if not res.degeneracy.strictly_complementary:
        reason = f"{DEGENERATE_SKIP} (weakly active constraints {res.degeneracy.weakly_active})"
        report.update(degenerate=True, skipped=reason, passed=True, max_rel_err=None,
                      worst_entry=None, per_column_solve_failures=[])
        print(reason, file=sys.stderr)
        _write(report)
        return EXIT_OK
    fd_config = dataclasses.replace(config, tol=min(config.tol, FD_SOLVE_TOL))
    fd = fd_jacobian(prog, pf.theta, fd_config, step=args.step, base=sol)
    cmp = compare(res.jac_x, fd)
    passed = cmp.max_rel_err <= CHECK_TOL and not cmp.per_column_solve_failures
    report.update(
        degenerate=False,
        step=args.step,
        jac_fd=cmp.jac_fd,
        max_rel_err=cmp.max_rel_err,
        worst_entry=cmp.worst_entry,
        per_column_solve_failures=cmp.per_column_solve_failures,
        tolerance=CHECK_TOL,
        passed=passed,
    )
    _write(report)
    if not passed:
        print(f"check failed: max relative error {cmp.max_rel_err:.3e} > {CHECK_TOL:g}"
              if cmp.max_rel_err > CHECK_TOL else
              f"check failed: re-solves failed for columns {cmp.per_column_solve_failures}",
              file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        pf = generate_problem(args.n, args.m, args.p, args.d, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    sys.stdout.write(emit_problem(pf))
    return EXIT_OK


def validate_report(doc) -> str:
    """Check a report produced by this tool; returns its command name."""
    if not isinstance(doc, dict):
        raise ValueError("report must be a JSON object")
    command = doc.get("command")
    if command not in REPORT_KEYS:
        raise ValueError(f"unknown report command {command!r}")
    if "error" in doc:
        return command
    missing = REPORT_KEYS[command] - set(doc)
    if missing:
        raise ValueError(f"{command} report is missing {sorted(missing)}")
    return command


def parse_report(path: str) -> int:
    try:
        text = sys.stdin.read() if path == "-" else open(path).read()
        command = validate_report(json.loads(text))
    except (OSError, ValueError) as exc:
        print(f"error: invalid report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"valid {command} report")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kkt-sense",
        description="Solve parameterized convex programs and differentiate their solutions.")
    parser.add_argument("--parse-report", metavar="REPORT",
                        help="validate a report written by this tool ('-' for stdin) and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("solve", help="solve the problem in FILE")
    p.add_argument("file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("jacobian", help="solve and differentiate the solution")
    p.add_argument("file")
    p.add_argument("--directional", metavar="V1,V2,...",
                   help="also report the derivative along this parameter direction")
    p.set_defaults(func=cmd_jacobian)

    p = sub.add_parser("check", help="compare the analytic Jacobian with finite differences")
    p.add_argument("file")
    p.add_argument("--step", type=float, default=DEFAULT_STEP, metavar="H",
                   help=f"relative finite-difference step (default {DEFAULT_STEP:g})")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("generate", help="write a random strictly feasible ParamQP to stdout")
    for name in ("n", "m", "p", "d"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.parse_report:
        return parse_report(args.parse_report)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
