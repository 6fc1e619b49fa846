import numpy as np
import pytest

from secmimo.config import SystemConfig, db2lin

ACCEPTANCE_LINES = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((number, "PASS" if passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    """Two cells, two users, small array: fast but exercises every code path."""
    return SystemConfig(L=1, K=2, N_t=16, T=64, tau=4, P0=10.0, Pe=db2lin(20) * 20.0)


def fig_cfg(**kw):
    base = dict(L=3, K=5, N_t=128, T=1024, tau=64, P0=10.0, Pe=db2lin(20) * 50.0)
    base.update(kw)
    return SystemConfig(**base)
