"""Per-iteration contraction-bound traces on small Gaussian systems.

Writes one trace CSV per (shape, p, eta) into ``--out-dir`` and prints a
summary line with the worst margin and whether the least-norm limit was
reached.

    python scripts/bound_traces.py --out-dir traces [--max-iters 200000]
"""
import argparse
import itertools
from pathlib import Path

from fgbk.matrix_io import gen_gaussian, make_consistent_problem
from fgbk.theory import check_contraction_bound, verification_config, write_trace_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="traces")
    ap.add_argument("--shapes", default="60x40,40x80,100x100")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-iters", type=int, default=200_000)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shapes = [tuple(int(v) for v in s.split("x")) for s in args.shapes.split(",")]
    for (m, n), p, eta in itertools.product(shapes, (1.0, 2.0, 3.0), (0.1, 0.5, 1.0)):
        prob = make_consistent_problem(gen_gaussian(m, n, args.seed), args.seed)
        tr = check_contraction_bound(prob, verification_config(p, eta, max_iters=args.max_iters), strict=False)
        path = out / f"trace_{m}x{n}_p{p:g}_eta{eta:g}.csv"
        write_trace_csv(tr, path)
        print(f"{m}x{n} p={p:g} eta={eta:g}: iters={tr.iters} violations={len(tr.violations)} "
              f"worst_margin={tr.worst_margin():.2e} least_norm_gate={'met' if tr.final_gate() else 'missed'}")


if __name__ == "__main__":
    main()
