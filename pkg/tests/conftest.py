import numpy as np
import pytest

from binapprox.grid import TimeGrid, gen_wiener_ensemble


@pytest.fixture(scope="session")
def grid_1024():
    return TimeGrid(1.0, 1024)


@pytest.fixture(scope="session")
def wiener_small(grid_1024):
    return gen_wiener_ensemble(grid_1024, 64, seed_base=100)


def triangle_l2(M, delta, T=1.0):
    """L2 norm of a triangle wave between 0 and M*delta on [0, T]."""
    return M * delta * np.sqrt(T / 3.0)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion and fail the test on FAIL."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
