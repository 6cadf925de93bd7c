import numpy as np
import pytest

from mbgs.simgen import SimConfig, simulate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_sim():
    """Small simulated dataset (n = 60, m = 40) with phenotype and map."""
    return simulate(SimConfig(n=60, m=40, chromosomes=2, n_causal=4, h2=0.6, seed=11))


def random_genotypes(rng, n, m, p_low=0.1, p_high=0.5):
    p = rng.uniform(p_low, p_high, size=m)
    return rng.binomial(2, p, size=(n, m)).astype(float)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record one acceptance line: ``acceptance(number, passed, detail)``."""

    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
