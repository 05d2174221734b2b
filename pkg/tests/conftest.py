import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracocp.assembly import assemble_operator
from fracocp.mesh import build_uniform_mesh

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def mesh16():
    return build_uniform_mesh(-0.5, 0.5, 16)


@pytest.fixture(scope="session")
def op16(mesh16):
    return assemble_operator(mesh16, 0.5)


@pytest.fixture(scope="session")
def op8():
    return assemble_operator(build_uniform_mesh(-0.5, 0.5, 8), 0.5)


@pytest.fixture(scope="session")
def op64():
    return assemble_operator(build_uniform_mesh(-0.5, 0.5, 64), 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = {}


def record_acceptance(number: int, passed: bool, text: str):
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
