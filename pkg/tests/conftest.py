import pytest

from gpurn.urn_model import PolyCurve, PwlCurve, UrnSpec


@pytest.fixture
def uniform2():
    return UrnSpec.uniform(2)


@pytest.fixture
def linear1():
    """K = 1 with pi_1(alpha) = alpha, started at psi_init = 1/2."""
    return UrnSpec(1, [PolyCurve([0.0, 1.0])], psi_init=0.5)


@pytest.fixture
def smooth2():
    """K = 2 with every pi_k between 0.1 and 0.6 on [0, 2]."""
    return UrnSpec(2, [PolyCurve([0.25, 0.1]), PolyCurve([0.15, 0.15])])


@pytest.fixture
def curvy2():
    """K = 2 mixing a quadratic and a piecewise-linear component."""
    return UrnSpec(2, [PolyCurve([0.2, 0.1, -0.03]),
                       PwlCurve([(0.0, 0.1), (0.8, 0.4), (2.0, 0.25)])], psi_init=0.3)


_ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collect one verdict line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
