import numpy as np
import pytest

from magspec.domain import build_domain, centered_domain
from magspec.hamiltonian import assemble
from magspec.presets import sample_preset

SWIRL = {"kind": "swirl", "center": [0.03, -0.02], "radius": 0.33, "amplitude": 0.3}
V_BUMP = {"kind": "bump", "center": [0.02, -0.03], "radius": 0.33, "amplitude": 2.0}
REFERENCE = {"A": SWIRL, "V": V_BUMP}


def operator_pair(domain, p1, p2="zero"):
    ops = []
    for p in (p1, p2):
        A, V = sample_preset(domain, p, require_collar=True)
        ops.append(assemble(domain, A, V))
    return ops


@pytest.fixture(scope="session")
def tiny():
    # 8 x 8 interior nodes
    return centered_domain(1.0, 1.0, 10, 10, 0.2)


@pytest.fixture(scope="session")
def tiny_pair(tiny):
    p1 = {"A": {"kind": "swirl", "radius": 0.25, "amplitude": 0.8},
          "V": {"kind": "bump", "radius": 0.25, "amplitude": 3.0}}
    return operator_pair(tiny, p1)


@pytest.fixture(scope="session")
def small():
    return centered_domain(1.0, 1.0, 33, 33, 0.1)


@pytest.fixture(scope="session")
def small_pair(small):
    return operator_pair(small, REFERENCE)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def boundary_wave(domain, k=(1.0, 2.0)):
    from magspec.domain import boundary_function
    return boundary_function(domain, lambda x, y: np.exp(1j * (k[0] * x + k[1] * y)))


def unit_square(N, w=0.1):
    return build_domain(1.0, 1.0, N, N, w)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
