import numpy as np
import pytest

# NV electron spin: 28.025 GHz/T -> 2*pi*0.028025 rad/(us*uT)
NV_GYRO = 2 * np.pi * 0.028025


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    return m / np.trace(m).real


# one line per acceptance criterion, echoed at the end of the pytest run
ACCEPTANCE = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
