import numpy as np
import pytest


def central_gradient(f, x, h=1e-5):
    """Classical gradient by 4th-order central differences (test oracle)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (title, passed); filled by test_acceptance.py
ACCEPTANCE = {}


class criterion:
    """Context manager recording the outcome of one acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title = number, title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        ACCEPTANCE[self.number] = (self.title, ok)
        print(f"acceptance {self.number}: {'PASS' if ok else 'FAIL'}  {self.title}")
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
