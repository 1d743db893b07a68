import numpy as np
import pytest

from coldec import kernels
from coldec.fixture import build_toy_inputs, build_toy_model

_acceptance = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_model():
    return build_toy_model()


@pytest.fixture(scope="session")
def toy_inputs(toy_model):
    return build_toy_inputs(toy_model)


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{outcome.upper():8s} {name}")
