"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 model/plan/config parse or validation
failure, 3 enumeration refused by the resource guard, 4 the two algorithms
disagree.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import bench, plan as plans
from .enumerator import (DEFAULT_NODE_CAP, Disagreement, ResourceLimitExceeded, compare,
                         enumerate_optimal)
from .model import ModelError, PomdpModel, as_belief, load_model, point_belief
from .problems import PROBLEMS, get_problem
from .protocols import BRANCH_MODES, VARIANTS
from .solver import SolveConfig, solve, value_at

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RESOURCE, EXIT_DISAGREE = 0, 1, 2, 3, 4

log = logging.getLogger("kcontingency")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def format_value(v: float) -> str:
    s = f"{v:.9f}"
    return "0.000000000" if s == "-0.000000000" else s


def parse_start(model: PomdpModel, text: str | None) -> np.ndarray:
    """``uniform``, a state name, or probabilities separated by commas/spaces."""
    if text is None:
        return model.start
    text = text.strip()
    if text == "uniform":
        return np.full(model.n_states, 1.0 / model.n_states)
    if text in model.states:
        return point_belief(model.n_states, model.state_index(text))
    try:
        probs = [float(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise ModelError(f"--start: {text!r} is neither a state name nor a probability list") from None
    return as_belief(probs, model.n_states)


def _add_selection(p: argparse.ArgumentParser, budget: bool = True) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", choices=sorted(PROBLEMS), help="built-in benchmark problem")
    src.add_argument("--model", metavar="FILE", help=".pomdp model file")
    p.add_argument("--start", help="initial belief: 'uniform', a state name, or probabilities")
    p.add_argument("--discount", type=float, help="override the model's discount")
    if not budget:
        return
    p.add_argument("--horizon", "-H", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="branch budget")
    p.add_argument("--variant", choices=VARIANTS, default="balanced")
    p.add_argument("--branch", choices=BRANCH_MODES, default="full", help="branch condition family")
    p.add_argument("--coupled", action="store_true",
                   help="fuse branching with the preceding action (action-dependent observations)")


def _add_outputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--extract-plan", metavar="FILE", help="write the optimal plan as JSON")
    p.add_argument("--dot", metavar="FILE", help="write the optimal plan as Graphviz DOT")
    p.add_argument("--csv", metavar="FILE", help="append a benchmark row")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kcontingency",
                     description="Optimal limited-contingency planning for finite-horizon POMDPs.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="value iteration over branch budgets")
    _add_selection(p)
    _add_outputs(p)

    p = sub.add_parser("enumerate", help="exhaustive plan enumeration baseline")
    _add_selection(p)
    _add_outputs(p)
    p.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP)

    p = sub.add_parser("compare", help="run both algorithms and check they agree")
    _add_selection(p)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP)

    p = sub.add_parser("eval", help="expected value of a saved plan")
    _add_selection(p, budget=False)
    p.add_argument("--plan", required=True, metavar="FILE")

    p = sub.add_parser("bench", help="sweep a k x H grid and append rows to CSV")
    p.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    p.add_argument("--variant", choices=VARIANTS, default="balanced")
    p.add_argument("--branch", choices=BRANCH_MODES, default="full")
    p.add_argument("--coupled", action="store_true")
    p.add_argument("--discount", type=float)
    p.add_argument("--k-values", default="0-3", help="e.g. '0,1,2' or '0-3'")
    p.add_argument("--horizons", default="1-8", help="e.g. '1-8'")
    p.add_argument("--algorithms", default="okp,enumerate")
    p.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP)
    p.add_argument("--csv", required=True, metavar="FILE")
    p.add_argument("--plot-dir", metavar="DIR",
                   help="directory for figures (default: next to the CSV)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("plot", help="render figures from an existing benchmark CSV")
    p.add_argument("--csv", required=True, metavar="FILE")
    p.add_argument("--plot-dir", metavar="DIR")
    p.add_argument("--format", default="png", choices=("png", "pdf", "svg"))
    return parser


def _load(args) -> PomdpModel:
    model = get_problem(args.problem) if args.problem else load_model(args.model)
    return model.with_start(parse_start(model, args.start))


def _config(args) -> SolveConfig:
    return SolveConfig(args.horizon, args.k, args.variant, args.branch, args.coupled, args.discount)


def _label(args) -> str:
    return args.problem or os.path.splitext(os.path.basename(args.model))[0]


def _write_plan(args, plan) -> None:
    if args.extract_plan:
        plans.save(plan, args.extract_plan)
    if args.dot:
        with open(args.dot, "w") as f:
            f.write(plans.to_dot(plan))


def _cmd_solve(args) -> int:
    model, config = _load(args), _config(args)
    policy = solve(model, config)
    value = value_at(policy)
    print(format_value(value))
    if args.extract_plan or args.dot:
        _write_plan(args, plans.extract(policy))
    if args.csv:
        bench.CsvAppender(args.csv)(bench.BenchmarkRow(
            _label(args), config.variant, config.branch_mode, config.k, config.horizon, "okp",
            value, policy.seconds, alpha_vectors=policy.total_vectors))
    log.info("%d alpha-vectors in %.3fs", policy.total_vectors, policy.seconds)
    return EXIT_OK


def _cmd_enumerate(args) -> int:
    model, config = _load(args), _config(args)
    plan, value, stats = enumerate_optimal(model, config, node_cap=args.node_cap)
    print(format_value(value))
    _write_plan(args, plan)
    if args.csv:
        bench.CsvAppender(args.csv)(bench.BenchmarkRow(
            _label(args), config.variant, config.branch_mode, config.k, config.horizon,
            "enumerate", value, stats.seconds, enum_nodes=stats.nodes))
    log.info("%d nodes, %d plans in %.3fs", stats.nodes, stats.plans_considered, stats.seconds)
    return EXIT_OK


def _cmd_compare(args) -> int:
    model, config = _load(args), _config(args)
    try:
        report = compare(model, config, tol=args.tol, node_cap=args.node_cap)
    except Disagreement as exc:
        r = exc.report
        print(f"okp {format_value(r['okp_value'])}")
        print(f"enumerate {format_value(r['enum_value'])}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISAGREE
    print(f"okp {format_value(report['okp_value'])}")
    print(f"enumerate {format_value(report['enum_value'])}")
    log.info("okp %.3fs, enumerate %.3fs", report["okp_seconds"], report["enum_seconds"])
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = _load(args)
    plan = plans.load(args.plan)
    plans.validate_plan(model, plan)
    print(format_value(plans.evaluate_plan(model, plan, gamma=args.discount)))
    return EXIT_OK


def _plot(rows, csv_path, plot_dir, fmt="png") -> None:
    from .report import render
    out = plot_dir or os.path.dirname(os.path.abspath(csv_path))
    prefix = os.path.splitext(os.path.basename(csv_path))[0] + "_"
    for path in render(rows, out, prefix, fmt):
        print(path, file=sys.stderr)


def _cmd_bench(args) -> int:
    model = get_problem(args.problem)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    unknown = set(algorithms) - set(bench.ALGORITHMS)
    if unknown:
        raise _UsageError(f"unknown algorithm(s): {', '.join(sorted(unknown))}")
    try:
        ks, horizons = bench.parse_int_list(args.k_values), bench.parse_int_list(args.horizons)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    rows = bench.sweep(model, args.problem, ks, horizons, args.variant, args.branch, algorithms,
                       args.coupled, args.discount, node_cap=args.node_cap,
                       on_row=bench.CsvAppender(args.csv))
    for r in rows:
        print(f"{r.algorithm:9s} k={r.k} H={r.H} {format_value(r.value)} {r.seconds:.4f}s")
    bad = bench.disagreements(rows)
    if not args.no_plots and rows:
        _plot(rows, args.csv, args.plot_dir)
    if bad:
        for key, vals in bad:
            print(f"error: disagreement at {key}: {vals}", file=sys.stderr)
        return EXIT_DISAGREE
    return EXIT_OK


def _cmd_plot(args) -> int:
    _plot(bench.read_rows(args.csv), args.csv, args.plot_dir, args.format)
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "enumerate": _cmd_enumerate, "compare": _cmd_compare,
            "eval": _cmd_eval, "bench": _cmd_bench, "plot": _cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ModelError, plans.PlanError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
