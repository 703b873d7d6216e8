import numpy as np
import pytest

from graphstab.graph import GraphShiftOperator
from graphstab.linalg import operator_norm


def random_symmetric(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) * scale
    return 0.5 * (A + A.T)


def random_graph(n, seed, p=0.3, normalize=True):
    """Weighted undirected graph without self-loops, optionally scaled to unit norm."""
    rng = np.random.default_rng(seed)
    A = np.triu((rng.random((n, n)) < p) * rng.random((n, n)), 1)
    A = A + A.T
    if normalize and np.any(A):
        A = A / operator_norm(A)
    return GraphShiftOperator(A)


@pytest.fixture
def graph6():
    return random_graph(6, 3, p=0.6)


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE = {}


def verdict(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    assert ok, f"criterion {number}: {detail}"


def skipped(number, reason):
    ACCEPTANCE[number] = (None, reason)
    pytest.skip(reason)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'SKIP' if ok is None else 'PASS' if ok else 'FAIL'}  {detail}")
