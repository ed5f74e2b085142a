"""Iteration and timing table for seeded Gaussian systems.

For every shape FGBK runs an eta sweep at each p, followed by FDBK and GBK.
Rows report the median over seeds. The default family is 500 x {1000..1800};
``--full`` switches to 5000 x {10000..18000}, which takes hours.

    python scripts/gaussian_table.py [--seeds 5] [--full] [--out table.csv]
"""
import argparse
import csv
import statistics
import sys

from fgbk.bench import run_one, sweep_eta
from fgbk.matrix_io import gen_gaussian, make_consistent_problem

DESK = [(500, n) for n in (1000, 1200, 1400, 1600, 1800)]
FULL = [(5000, n) for n in (10000, 12000, 14000, 16000, 18000)]


def table_rows(shapes, seeds, ps=(1.0, 2.0, 3.0), tol=1e-6, max_iters=10000):
    for m, n in shapes:
        runs = {}
        for seed in range(seeds):
            prob = make_consistent_problem(gen_gaussian(m, n, seed), seed)
            for p in ps:
                eta, rows = sweep_eta(prob, p, tol=tol, max_iters=max_iters)
                best = next(r for r in rows if r.eta == eta)
                runs.setdefault(f"fgbk p={p:g}", []).append((best.iters, best.cpu_seconds, eta))
            for method in ("fdbk", "gbk"):
                r = run_one(prob, method, tol=tol, max_iters=max_iters)
                runs.setdefault(method, []).append((r.iters if r.converged else float("inf"), r.cpu_seconds, None))
        for label, vals in runs.items():
            etas = [v[2] for v in vals if v[2] is not None]
            yield {
                "shape": f"{m}x{n}",
                "method": label,
                "eta_exp": statistics.median(etas) if etas else "",
                "iters": statistics.median(v[0] for v in vals),
                "cpu_seconds": round(statistics.median(v[1] for v in vals), 4),
            }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--full", action="store_true", help="use the 5000-row family")
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args()
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=["shape", "method", "eta_exp", "iters", "cpu_seconds"])
    w.writeheader()
    for row in table_rows(FULL if args.full else DESK, args.seeds):
        w.writerow(row)
        fh.flush()


if __name__ == "__main__":
    main()
