import numpy as np
import pytest

from ska_recall.linalg import implementations

ACCEPTANCE = {}  # criterion number -> (passed, summary line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion n")


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile the numba kernels once so timing-sensitive tests see steady state
    from ska_recall.config import SkaConfig
    from ska_recall.engine import RecurrentState

    st = RecurrentState(SkaConfig(rank_r=4, head_dim_p=3), 1.0)
    st.decode(np.ones(4), np.ones(3), np.ones(4))
    st.step(np.ones(4), np.ones(3))
    st.retrieve(np.ones(4))


@pytest.fixture(params=sorted(implementations()))
def kern(request):
    """Each available kernel backend in turn."""
    return implementations()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def record(n, passed, line):
    ACCEPTANCE[n] = (passed, line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, line = ACCEPTANCE[n]
        tr.write_line(f"[{'PASS' if passed else 'FAIL'}] {n:2d}. {line}")
