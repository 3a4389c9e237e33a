import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hybridclust.metric import MetricSpace

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def line(xs, fs=None):
    """1-d euclidean space; fs=None leaves the facilities continuous."""
    P = np.asarray(xs, dtype=float)[:, None]
    F = None if fs is None else np.asarray(fs, dtype=float)[:, None]
    return MetricSpace.euclidean(P, F)


@pytest.fixture
def small_line():
    # clients 0 1 2 10 11, facilities 1 10.5 5
    return line([0, 1, 2, 10, 11], [1, 10.5, 5])


# acceptance tests append (criterion, passed, detail); printed after the run
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")
