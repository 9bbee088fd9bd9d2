import warnings

import pytest
from hypothesis import HealthCheck, settings

from nlsground.grid import build_grid
from nlsground.minimizer import FlowConfig, minimize_on_sphere
from nlsground.potentials import PotentialSpec

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def qq():
    return PotentialSpec.quartic_quintic()


@pytest.fixture(scope="session")
def rational():
    return PotentialSpec.rational(2.5, 3.0)


@pytest.fixture(scope="session")
def grid40():
    return build_grid(3, 40.0, 2000)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(3, 20.0, 400)


@pytest.fixture(scope="session")
def ground_state(qq, grid40):
    """Quartic-quintic minimizer at rho = 30, well above the threshold near 20."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return minimize_on_sphere(grid40, qq, 30.0, FlowConfig(residual_tol=1e-10))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one PASS/FAIL line per criterion; printed in the terminal summary."""
    def log(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return log
