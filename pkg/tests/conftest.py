import functools
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def _spectrum(L, h, frustrated=True):
    from frustrated_tfim.hamiltonian import IsingHamiltonian
    from frustrated_tfim.lattice import lattice
    from frustrated_tfim.spectra import dense_spectrum
    return dense_spectrum(IsingHamiltonian(lattice(L, frustrated), h))


@pytest.fixture(scope="session")
def spectrum():
    """Cached dense spectra keyed by (L, h, frustrated)."""
    return _spectrum


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request, capsys):
    """Record one PASS/FAIL line for an acceptance criterion and echo it immediately."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
        store[number] = line
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
