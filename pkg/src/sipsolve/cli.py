"""Command-line shell: solve, check and bench subcommands.

solve runs one of the three algorithms on a problem file (or builtin
instance) and writes an outcome JSON plus a trace CSV; exit code 0 means a
certified result, 2 a budget-limited partial result, 1 an input error.
check validates a problem file including its Slater certificate.  bench
compares discretization growth between the minimal (rho = 0) and monotone
(rho = inf) pruning policies on the same instance.
"""

from __future__ import annotations

import argparse
import re
import sys

import numpy as np

from .core_loop import (
    CoreConfig,
    CoreStatus,
    eventually_zero_schedule,
    geometric_schedule,
    run_core,
)
from .drivers import (
    Budget,
    OutcomeStatus,
    SequentialConfig,
    SimultaneousConfig,
    SolveOutcome,
    run_sequential,
    run_simultaneous,
)
from .errors import CertificationError, ConfigError, InputError
from .instances import default_y0
from .problem import derive_eps_star, validate_problem
from .serialization import fmt17, load_problem, write_outcome_json, write_trace_csv

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_BUDGET = 2


def parse_schedule(text: str):
    m = re.fullmatch(r"geometric\(([^)]+)\)", text)
    if m:
        return geometric_schedule(ratio=float(m.group(1)))
    m = re.fullmatch(r"eventually_zero\((\d+)\)", text)
    if m:
        return eventually_zero_schedule(zero_from=int(m.group(1)))
    raise InputError(
        f"unknown schedule {text!r}; use geometric(q) or eventually_zero(k0)"
    )


def parse_rho(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return np.inf
    value = float(text)
    if value < 0:
        raise InputError("rho must be nonnegative or inf")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sipsolve",
        description="Certified adaptive-discretization solver for convex "
        "semi-infinite programs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run a driver and write outcome/trace")
    solve.add_argument("--problem", required=True, help="JSON path or builtin:NAME")
    solve.add_argument(
        "--algorithm",
        choices=("core", "sequential", "simultaneous"),
        default="sequential",
    )
    solve.add_argument("--delta", type=float, default=1e-2)
    solve.add_argument("--rho", type=parse_rho, default=0.0)
    solve.add_argument("--r", type=float, default=2.0)
    solve.add_argument("--eps0", type=float, default=1.0)
    solve.add_argument("--schedule", default="eventually_zero(0)")
    solve.add_argument("--max-iters", type=int, default=10_000)
    solve.add_argument("--budget", type=int, default=1_000_000,
                       help="total finite-solver call budget")
    solve.add_argument("--trace-out", default="trace.csv")
    solve.add_argument("--outcome-out", default="outcome.json")

    check = sub.add_parser("check", help="validate a problem file")
    check.add_argument("--problem", required=True)

    bench = sub.add_parser(
        "bench", help="discretization-size comparison between rho=0 and rho=inf"
    )
    bench.add_argument("--problem", required=True)
    bench.add_argument("--eps", type=float, default=0.0)
    bench.add_argument("--max-iters", type=int, default=30)
    bench.add_argument("--schedule", default="eventually_zero(0)")
    bench.add_argument("--table-out", default=None)
    return parser


def _core_outcome(problem, result) -> SolveOutcome:
    """Wrap a core-loop result so the same writers apply."""
    from .drivers import budget_outcome, post_hoc_outcome

    iters = {"outer": 1, "inner": result.iterations}
    if result.status is CoreStatus.TERMINATED:
        f_val = float(problem.objective.value(result.x))
        return post_hoc_outcome(
            problem, result.x, f_val, OutcomeStatus.DELTA_APPROXIMATE,
            iters, result.trace,
        )
    f_val = (
        float(problem.objective.value(result.x)) if result.x is not None else np.nan
    )
    return budget_outcome(problem, result.x, f_val, iters, result.trace)


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    schedule = parse_schedule(args.schedule)
    y0 = default_y0(problem)
    budget = Budget(solver_calls=args.budget)

    if args.algorithm == "core":
        cfg = CoreConfig(
            eps=args.eps0,
            rho=args.rho,
            schedule=schedule,
            y0=y0,
            max_iters=args.max_iters,
        )
        result = run_core(problem, cfg)
        outcome = _core_outcome(problem, result)
        status_label = result.status.value
    elif args.algorithm == "sequential":
        cfg = SequentialConfig(
            delta=args.delta,
            r=args.r,
            eps00=args.eps0,
            schedule=schedule,
            rho=args.rho,
            y0=y0,
            inner_max_iters=args.max_iters,
        )
        outcome = run_sequential(problem, cfg, budget=budget)
        status_label = outcome.status.value
    else:
        cfg = SimultaneousConfig(
            delta=args.delta,
            r=args.r,
            eps0=args.eps0,
            schedule=schedule,
            rho=args.rho,
            y0_check=y0,
            y0_hat=y0,
            max_iters=args.max_iters,
        )
        outcome = run_simultaneous(problem, cfg, budget=budget)
        status_label = outcome.status.value

    write_trace_csv(args.trace_out, outcome.trace)
    write_outcome_json(args.outcome_out, outcome)
    print(f"status: {status_label}")
    if outcome.x_star is not None:
        print(f"x*: [{', '.join(fmt17(v) for v in outcome.x_star)}]")
        print(f"f(x*): {fmt17(outcome.f_value)}")
        print(f"feasibility margin: {fmt17(outcome.feasibility_margin)}")
    print(f"trace: {args.trace_out}\noutcome: {args.outcome_out}")
    return (
        EXIT_OK
        if outcome.status is OutcomeStatus.DELTA_APPROXIMATE
        else EXIT_BUDGET
    )


def cmd_check(args) -> int:
    problem = load_problem(args.problem)
    report = validate_problem(problem)
    print(f"constraint families: {len(problem.constraints)}")
    print(f"x box: {problem.x_domain.dim}-dim, diameter {fmt17(problem.x_domain.diameter())}")
    print(f"y box: {problem.y_domain.dim}-dim, diameter {fmt17(problem.y_domain.diameter())}")
    if problem.slater_point is not None:
        bundle = derive_eps_star(problem, oracle_tol=1e-9)
        print(f"slater certificate ok, eps* = {fmt17(bundle.eps_star)}")
    else:
        print("no slater point declared")
    if not report.ok:
        for failure in report.failures:
            print(f"oracle check FAILED: {failure}")
        return EXIT_INPUT_ERROR
    print("oracle checks passed")
    return EXIT_OK


def cmd_bench(args) -> int:
    problem = load_problem(args.problem)
    schedule = parse_schedule(args.schedule)
    y0 = default_y0(problem)
    cards: dict[float, list[int]] = {}
    for rho in (0.0, np.inf):
        cfg = CoreConfig(
            eps=args.eps,
            rho=rho,
            schedule=schedule,
            y0=y0,
            max_iters=args.max_iters,
        )
        result = run_core(problem, cfg)
        cards[rho] = [row.card_y for row in result.trace.rows]
    n = max(len(cards[0.0]), len(cards[np.inf]))
    lines = ["k,card_rho0,card_rhoinf"]
    for k in range(n):
        a = cards[0.0][k] if k < len(cards[0.0]) else ""
        b = cards[np.inf][k] if k < len(cards[np.inf]) else ""
        lines.append(f"{k},{a},{b}")
    table = "\n".join(lines) + "\n"
    if args.table_out:
        with open(args.table_out, "w") as fh:
            fh.write(table)
        print(f"table: {args.table_out}")
    else:
        sys.stdout.write(table)
    print(
        f"max |Y^k|: rho=0 -> {max(cards[0.0], default=0)}, "
        f"rho=inf -> {max(cards[np.inf], default=0)}"
    )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "check":
            return cmd_check(args)
        return cmd_bench(args)
    except (InputError, ConfigError, CertificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
