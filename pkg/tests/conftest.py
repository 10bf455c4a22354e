import sys

import numpy as np
import pytest

from motionsphere.geometry import l2_norm, project_to_sphere, project_to_tangent


def random_point(rng, shape=(12, 6)):
    return project_to_sphere(rng.standard_normal(shape))


def random_tangent(rng, mu, norm):
    v = project_to_tangent(mu, rng.standard_normal(mu.shape))
    return v * (norm / l2_norm(v))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def finite_difference(f, x, h=1e-5):
    """Central-difference gradient of scalar ``f`` at numpy array ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        up = f(x)
        x[i] = old - h
        down = f(x)
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
