import os
import sys

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from markov_fusion import TransitionCounts, validate_matrix  # noqa: E402

# acceptance id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[k]
        terminalreporter.write_line(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} | {detail}")


@st.composite
def ergodic_matrices(draw, min_m=2, max_m=4):
    m = draw(st.integers(min_m, max_m))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=m * m, max_size=m * m))
    a = np.asarray(raw).reshape(m, m)
    return validate_matrix(a / a.sum(axis=1, keepdims=True))


@st.composite
def count_tables(draw, min_m=2, max_m=4, hi=60, allow_zero_cells=True):
    m = draw(st.integers(min_m, max_m))
    lo = 0 if allow_zero_cells else 1
    cells = draw(st.lists(st.integers(lo, hi), min_size=m * m, max_size=m * m))
    n = np.asarray(cells).reshape(m, m)
    n[n.sum(axis=1) == 0, 0] = 1
    return TransitionCounts(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
