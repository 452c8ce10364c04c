import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dynkcenter import CORES, EuclideanBackend, MetricPoint, NavigatingNet

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=sorted(CORES))
def core(request):
    return request.param


def points_from(X):
    return [MetricPoint(i, tuple(float(v) for v in row)) for i, row in enumerate(X)]


def build(X, core=None, gamma=4.0):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    pts = points_from(X)
    return NavigatingNet.build(pts, EuclideanBackend(X.shape[1]), gamma, core), pts


def mixed_cloud(rng, n, dim, clusters=3):
    """Uniform or clustered points, duplicates removed."""
    if rng.random() < 0.5:
        X = rng.random((n, dim))
    else:
        c = rng.random((clusters, dim)) * 100
        X = c[rng.integers(0, clusters, n)] + rng.normal(size=(n, dim)) * 0.5
    return np.unique(X, axis=0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
