"""Iteration table for MatrixMarket files, median over planted-solution seeds.

    python scripts/suitesparse_table.py matrices/*.mtx [--seeds 3] [--sweep]

Without ``--sweep`` FGBK uses p=1, eta=0.1; with it each p gets its own
eta sweep.
"""
import argparse
import csv
import statistics
import sys
from pathlib import Path

from fgbk.bench import matrix_info, run_one, sweep_eta
from fgbk.matrix_io import make_consistent_problem, read_matrix_market


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("files", nargs="+")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--sweep", action="store_true")
    ap.add_argument("--max-iters", type=int, default=10000)
    args = ap.parse_args()

    w = csv.writer(sys.stdout)
    w.writerow(["matrix", "m", "n", "density", "cond", "method", "eta", "iters_median", "iters_all"])
    for f in args.files:
        A = read_matrix_market(f)
        info = matrix_info(A)
        cond = f"{info.cond:.4g}" if info.cond is not None else ""
        runs = {}
        for seed in range(args.seeds):
            prob = make_consistent_problem(A, seed, label=Path(f).stem)
            if args.sweep:
                for p in (1.0, 2.0, 3.0):
                    eta, rows = sweep_eta(prob, p, max_iters=args.max_iters)
                    best = next(r for r in rows if r.eta == eta)
                    runs.setdefault((f"fgbk p={p:g}", eta), []).append(best.iters)
            else:
                r = run_one(prob, "fgbk", 1.0, 0.1, max_iters=args.max_iters)
                runs.setdefault(("fgbk p=1", 0.1), []).append(r.iters if r.converged else float("inf"))
            for method in ("fdbk", "gbk"):
                r = run_one(prob, method, max_iters=args.max_iters)
                runs.setdefault((method, ""), []).append(r.iters if r.converged else float("inf"))
        for (method, eta), its in runs.items():
            w.writerow([Path(f).stem, info.m, info.n, f"{info.density:.4f}", cond, method, eta,
                        statistics.median(its), " ".join(map(str, its))])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
