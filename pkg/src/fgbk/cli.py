"""Command line entry point: ``fgbk {solve,bench,sweep,verify,info}``.

Exit codes: 0 success, 1 solver or verification failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .bench import (
    DEFAULT_GRID,
    load_experiment_spec,
    matrix_info,
    parse_grid,
    parse_shape,
    run_experiment,
    run_one,
    sweep_eta,
)
from .errors import KaczmarzError, ParameterError, ParseError, SolverFailure, VerificationFailure
from .matrix_io import (
    RESULT_COLUMNS,
    format_record,
    gen_gaussian,
    make_consistent_problem,
    read_matrix_market,
    write_report_csv,
)
from .solvers import METHODS, SolverConfig
from .theory import check_contraction_bound, verification_config, write_trace_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_source(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix", help="MatrixMarket file")
    g.add_argument("--gaussian", metavar="MxN", help="seeded standard normal matrix")
    p.add_argument("--seed", type=int, default=0, help="matrix and planted-solution seed")


def build_parser():
    parser = _Parser(prog="fgbk", description="Greedy block Kaczmarz solvers and benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one method on one problem")
    _add_source(p)
    p.add_argument("--method", choices=METHODS, default="fgbk")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--history", help="write the per-iteration history CSV here")

    p = sub.add_parser("bench", help="run an experiment spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", help="result CSV (default: the experiment file's out key, else stdout)")

    p = sub.add_parser("sweep", help="grid-search eta for fgbk")
    _add_source(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--grid", default="0.05:0.05:1.0", help="lo:step:hi")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--out", help="result CSV (default stdout)")

    p = sub.add_parser("verify", help="check the fgbk contraction bound at every iteration")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-6, help="RSE target of the verified run")
    p.add_argument("--max-iters", type=int, default=200_000)
    p.add_argument("--trace", help="write the per-iteration bound trace CSV here")

    p = sub.add_parser("info", help="print size, density, rank and condition number")
    p.add_argument("--matrix", required=True)
    return parser


def _problem(args):
    if args.matrix:
        A = read_matrix_market(args.matrix)
        label = Path(args.matrix).stem
    else:
        m, n = parse_shape(args.gaussian)
        A = gen_gaussian(m, n, args.seed)
        label = f"gaussian_{m}x{n}_s{args.seed}"
    return make_consistent_problem(A, args.seed, label=label)


def _emit(rows, out):
    if out:
        write_report_csv(rows, out)
        return
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for row in rows:
        w.writerow(format_record(row, RESULT_COLUMNS))


def cmd_solve(args):
    # bad parameters are usage errors, not solver failures
    SolverConfig(method=args.method, p=args.p, eta=args.eta, tol=args.tol, max_iters=args.max_iters)
    prob = _problem(args)
    row = run_one(prob, args.method, args.p, args.eta, args.tol, args.max_iters, history_path=args.history, seed=args.seed)
    _emit([row], None)
    if row.note:
        print(f"solver failure: {row.note}", file=sys.stderr)
    return EXIT_OK if row.converged else EXIT_FAIL


def cmd_bench(args):
    spec = load_experiment_spec(args.spec)
    rows = run_experiment(spec)
    _emit(rows, args.out or spec.out)
    return EXIT_OK


def cmd_sweep(args):
    grid = parse_grid(args.grid) if args.grid else DEFAULT_GRID
    SolverConfig(method="fgbk", p=args.p, eta=grid[0], tol=args.tol, max_iters=args.max_iters)
    prob = _problem(args)
    eta_exp, rows = sweep_eta(prob, args.p, grid, tol=args.tol, max_iters=args.max_iters)
    _emit(rows, args.out)
    best = min(r.iters for r in rows if r.converged)
    print(f"eta_exp={eta_exp:g} iters={best}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    A = gen_gaussian(args.m, args.n, args.seed)
    prob = make_consistent_problem(A, args.seed, label=f"gaussian_{args.m}x{args.n}_s{args.seed}")
    cfg = verification_config(args.p, args.eta, tol=args.tol, max_iters=args.max_iters)
    try:
        trace = check_contraction_bound(prob, cfg)
    except VerificationFailure as exc:
        if args.trace and exc.trace is not None:
            write_trace_csv(exc.trace, args.trace)
        print(f"bound VIOLATED: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.trace:
        write_trace_csv(trace, args.trace)
    K = len(trace.records)
    print(f"contraction bound satisfied at all {K} iterations (worst margin {trace.worst_margin():.3e})")
    if not trace.converged:
        print(f"did not reach RSE < {args.tol:g} within {args.max_iters} iterations", file=sys.stderr)
        return EXIT_FAIL
    print(f"converged to the least-norm solution: ||x - A^+ b|| = {trace.final_error:.3e}")
    return EXIT_OK


def cmd_info(args):
    info = matrix_info(read_matrix_market(args.matrix))
    print(f"m={info.m} n={info.n} nnz={info.nnz} density={100 * info.density:.2f}%", end="")
    if info.rank is not None:
        print(f" rank={info.rank} cond={info.cond:.2f}")
    else:
        print(" rank=n/a cond=n/a")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "sweep": cmd_sweep, "verify": cmd_verify, "info": cmd_info}


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ParameterError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"fgbk {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverFailure, KaczmarzError) as exc:
        print(f"fgbk {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main():
    sys.exit(cli_main())
