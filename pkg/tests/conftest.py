import numpy as np
import pytest

from mrident.fixtures import benchmark_loop, random_stable_lti


@pytest.fixture(scope="session")
def loop():
    """Two-mass plant at 240 Hz, lead controller at 80 Hz (F = 3)."""
    return benchmark_loop()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_systems(count=5, seed=7, nu=1, ny=1, h=1.0):
    rng = np.random.default_rng(seed)
    return [random_stable_lti(rng, int(rng.integers(1, 6)), nu, ny, h) for _ in range(count)]


def rel_err(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b))


# acceptance criteria record their outcome here; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}  [{detail}]")
