import os

import hypothesis
import numpy as np
import pytest

from fgbk.linalg import DenseMatrix, SparseMatrixCsr

np.seterr(all="warn")

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.register_profile("thorough", deadline=None, max_examples=500)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def A32():
    """The 3x2 worked example [[1,0],[0,1],[1,1]]."""
    return DenseMatrix([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


@pytest.fixture
def A32_csr():
    return SparseMatrixCsr.from_dense([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def random_sparse(rng, m, n, density):
    mask = rng.random((m, n)) < density
    a = np.where(mask, rng.standard_normal((m, n)), 0.0)
    return a


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {status}  {detail}")
