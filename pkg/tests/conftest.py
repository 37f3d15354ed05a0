import pytest
from hypothesis import HealthCheck, settings

from pqsteklov import ProblemSpec, SolverConfig, generate_interval, generate_unit_square

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def interval2():
    return generate_interval(2)


@pytest.fixture(scope="session")
def interval100():
    return generate_interval(100)


@pytest.fixture(scope="session")
def square4():
    return generate_unit_square(4)


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


def uniform(mesh, p, q, a=1.0, b=0.0):
    return ProblemSpec.uniform(mesh, p, q, a, b)


def random_field(rng, mesh):
    return rng.uniform(-1.0, 1.0, mesh.n_nodes)
