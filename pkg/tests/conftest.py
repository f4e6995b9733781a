import sys

import numpy as np
import pytest

from linquad.symplectic import ConstraintPlane


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def plane(*vectors, scale=1.0):
    """Constraint plane spanned by the given phase vectors, keeping their normalization."""
    vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
    sub = ConstraintPlane.from_vectors(vecs, scale, vecs.shape[1] // 2)
    return ConstraintPlane(sub.basis, sub.measure_scale)


def e(n, label, j=1):
    """Unit phase vector e_Pj or e_Qj (1-based j) in (P, Q) order."""
    v = np.zeros(2 * n)
    v[(j - 1) + (n if label == "Q" else 0)] = 1.0
    return v


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[num])
