"""Write the bibd_16_8 incidence matrix as MatrixMarket.

Row ``i`` is the i-th 2-subset of {0..15} and column ``j`` the j-th 8-subset,
both in lexicographic order; the entry is 1 when the pair lies in the
subset. This gives the 120 x 12870 matrix (density 23.33%, rank 120,
cond 9.54) distributed in the JGD_BIBD group of the SuiteSparse collection,
for machines without a downloaded copy. Row and column order may differ
from the distributed file, which the greedy methods do not depend on.

    python scripts/make_bibd.py [--out matrices/bibd_16_8.mtx]
"""
import argparse
import itertools
from pathlib import Path

import numpy as np

from fgbk.linalg import SparseMatrixCsr
from fgbk.matrix_io import write_matrix_market


def bibd_incidence(v=16, k=8):
    pairs = {p: i for i, p in enumerate(itertools.combinations(range(v), 2))}
    rows, cols = [], []
    for j, block in enumerate(itertools.combinations(range(v), k)):
        for p in itertools.combinations(block, 2):
            rows.append(pairs[p])
            cols.append(j)
    n = len(rows) // (k * (k - 1) // 2)
    return SparseMatrixCsr.from_coo(np.array(rows), np.array(cols), np.ones(len(rows)), (len(pairs), n))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "matrices" / "bibd_16_8.mtx"))
    args = ap.parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    A = bibd_incidence()
    write_matrix_market(A, out, comment="bibd_16_8 reconstructed: pairs x 8-subsets of a 16-set")
    print(f"wrote {out} ({A.m}x{A.n}, nnz={A.nnz})")


if __name__ == "__main__":
    main()
