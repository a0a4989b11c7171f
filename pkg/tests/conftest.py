import numpy as np
import pytest

from sagnacsim.counting import CountRecord
from sagnacsim.polarization import TwoQubitState
from sagnacsim.tomography import tomo_settings


def random_density(rng, rank=None):
    """Random two-qubit state from a Ginibre matrix of the given rank."""
    rank = rank or 4
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    m = g @ g.conj().T
    return TwoQubitState(m / np.trace(m).real)


def exact_tomo_records(rho, total=1e6):
    """Noise-free tomography records: counts equal to their expectation."""
    return [
        CountRecord(p.label, float("nan"), float("nan"), 1.0, total * p.probability(rho))
        for p in tomo_settings()
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
