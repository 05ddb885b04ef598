import numpy as np
import pytest

from collapsim.hilbert import FockRegister, GridSpec, JointState, WaveField, gaussian_packet


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA[marker.args[0]] = (report.outcome, marker.args[1], detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome, title, detail = _CRITERIA[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {number:>2} {status}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def grid():
    return GridSpec()


@pytest.fixture
def small_grid():
    return GridSpec(64, -8.0, 8.0)


@pytest.fixture
def fock():
    return FockRegister(2)


def random_joint(rng, grid, fock):
    amp = rng.normal(size=(grid.n_points, fock.dim)) + 1j * rng.normal(size=(grid.n_points, fock.dim))
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dx)
    return JointState(grid, fock, amp)


def random_wave(rng, grid):
    amp = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dx)
    return WaveField(grid, amp)


def branch_state(grid, fock, w1=0.36, x1=-10.0, x2=10.0):
    """sqrt(1-w1)|psi_1>|0> + sqrt(w1)|psi_2>|1> with well separated packets."""
    p1 = gaussian_packet(grid, x1, 1.0, 0.0)
    p2 = gaussian_packet(grid, x2, 1.0, 0.0)
    amp = np.zeros((grid.n_points, fock.dim), dtype=complex)
    amp[:, 0] = np.sqrt(1 - w1) * p1.amp
    amp[:, 1] = np.sqrt(w1) * p2.amp
    return JointState(grid, fock, amp), p1, p2
