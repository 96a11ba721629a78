import numpy as np
import pytest

from musielak_parabolic.fem import FemSpace, build_mesh
from musielak_parabolic.library import shipped_problem


@pytest.fixture
def heat():
    return shipped_problem("heat-limit")


@pytest.fixture
def heat_scaled():
    """Heat limit with b(u) = 1.5 u."""
    return shipped_problem(
        "heat-limit",
        b={"kind": "linear", "params": {"slope": 1.5}},
        constants={"b0": 1.0, "nu": 2.0, "nu0": 0.1, "nu1": 0.1, "lambda": 1.0},
    )


@pytest.fixture
def one_dof():
    return FemSpace(build_mesh(1, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record a one-line verdict for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail=""):
        lines.append((number, f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")))
        print(lines[-1][1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
