import pytest
from hypothesis import HealthCheck, settings

from flatlab.builtins import builtin_surface

settings.register_profile(
    "default", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def torus():
    return builtin_surface("torus")


@pytest.fixture(scope="session")
def L3():
    return builtin_surface("L3")


@pytest.fixture(scope="session")
def L4():
    return builtin_surface("L4")


@pytest.fixture(scope="session")
def wollmilchsau():
    return builtin_surface("wollmilchsau")


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Record one acceptance line and fail the test if the criterion fails."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def _record(number, name, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append((number, line))
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
