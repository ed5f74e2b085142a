"""Greedy block Kaczmarz solvers for consistent linear systems.

The fast greedy block method (``fgbk``) picks every row whose p-norm
residual ratio is within a factor ``eta`` of the largest and takes one
averaged projection step over them. Baselines: ``fdbk``, ``gbk``, cyclic
``kaczmarz`` and randomized ``rk``.
"""
from .errors import KaczmarzError
from .linalg import DenseMatrix, RowNormCache, SparseMatrixCsr, as_matrix, extract_rows, row_norms, spmv, transpose_gather
from .matrix_io import (
    ProblemInstance,
    gen_gaussian,
    make_consistent_problem,
    read_matrix_market,
    write_matrix_market,
    write_report_csv,
)
from .selection import ControlSet, build_xi, fdbk_control_set, fgbk_control_set, gbk_control_set
from .solvers import SolveReport, SolverConfig, solve, solve_system
from .theory import beta_k, check_contraction_bound, singular_extremes
from .bench import ExperimentSpec, ResultRow, matrix_info, run_experiment, sweep_eta

__version__ = "0.1.0"
