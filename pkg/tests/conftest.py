import numpy as np
import pytest

from infospectrum import GaussianSource, IidSource, MixedSource, TestingProblem


def kl(q, p):
    """Plain D(q||p) in nats, written out independently of the package."""
    q, p = np.asarray(q, float), np.asarray(p, float)
    pos = q > 0
    return float(np.sum(q[pos] * np.log(q[pos] / p[pos])))


@pytest.fixture
def binary_pair():
    return TestingProblem(IidSource([0.5, 0.5]), IidSource([0.9, 0.1]))


@pytest.fixture
def gaussian_pair():
    return TestingProblem(GaussianSource(0.0, 1.0), GaussianSource(2.0, 1.0))


@pytest.fixture
def markov_kernels():
    return np.array([[0.9, 0.1], [0.2, 0.8]]), np.full((2, 2), 0.5)


@pytest.fixture
def mixture():
    return MixedSource([IidSource([0.8, 0.2]), IidSource([0.3, 0.7])], [0.5, 0.5])


@pytest.fixture
def four_state_chains():
    rng = np.random.default_rng(7)
    return rng.dirichlet(np.ones(4), 4), rng.dirichlet(np.ones(4), 4)


# one (number, title, passed, detail) entry per acceptance criterion, filled by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title} ({detail})")
