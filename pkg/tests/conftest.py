import numpy as np
import pytest

from featpipe import kernels
from featpipe.bundle import random_bundle, write_bundle

_BACKENDS = ["numpy"] + (["native"] if kernels.HAVE_NATIVE else [])


@pytest.fixture(params=_BACKENDS)
def backend(request):
    """Run the test once per available kernel backend."""
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def alexnet_bundle_dir(tmp_path_factory):
    """A seeded-random builtin-size bundle on disk, built once per run."""
    target = tmp_path_factory.mktemp("bundle")
    write_bundle(random_bundle(seed=1), str(target))
    return str(target)


def assert_close(got, want, rtol=1e-5, atol=1e-8):
    np.testing.assert_allclose(got, want, rtol=rtol, atol=atol)


# --- acceptance reporting -------------------------------------------------
# One pass/fail line per acceptance criterion at the end of the run.

_acceptance_results = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{status:6s} {name}")
