import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping ----------------------------------------------------

ACCEPTANCE_LINES = []
CERTIFICATE_SLACKS = []


@pytest.fixture(autouse=True, scope="session")
def _record_certificates():
    """Record the certificate slack of every isotonic fit made during the run."""
    from seterm import isotonic

    original = isotonic.IsotonicFit.with_slack

    def recording(self, slack):
        CERTIFICATE_SLACKS.append(float(slack))
        return original(self, slack)

    isotonic.IsotonicFit.with_slack = recording
    yield
    isotonic.IsotonicFit.with_slack = original


def pytest_collection_modifyitems(config, items):
    # acceptance checks run last so the certificate criterion sees every fit
    items.sort(key=lambda item: item.nodeid.startswith("tests/test_acceptance.py"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
