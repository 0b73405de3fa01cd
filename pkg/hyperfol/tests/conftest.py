"""Pytest configuration for the hyperfol test suite."""
import os
import sys

import pytest

# Add the source root to the path so flat imports resolve
sys.path.insert(0, os.path.abspath(os.path.dirname(os.path.dirname(__file__))))

os.environ["HYPERFOL_DETERMINISTIC"] = "true"
os.environ.pop("HYPERFOL_THREADS", None)

from models.grid import Grid  # noqa: E402
from services.monitoring import RunMetrics  # noqa: E402
from services.presets import get_preset  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: simulations and convergence studies (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def reset_metrics():
    """Start every test with an empty metrics store"""
    RunMetrics.reset()
    yield
    RunMetrics.reset()


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """A fresh output directory, also exported as HYPERFOL_OUTPUT_DIR"""
    target = tmp_path / "runs"
    monkeypatch.setenv("HYPERFOL_OUTPUT_DIR", str(target))
    return str(target)


@pytest.fixture(scope="session")
def small_grid():
    """Lattice with h = 0.25 covering the support of H_2 plus a stencil margin"""
    return Grid.from_spacing(0.25, 3.0)


@pytest.fixture
def short_run():
    """Factory for cheap preset runs from s = 2 on a coarse grid"""
    def build(name: str, s_end: float = 2.6, **overrides):
        settings = {"s0": 2.0, "s_end": s_end, "h": 0.25, "zi_order": 0, "cadence": 1}
        settings.update(overrides)
        return get_preset(name, **settings)
    return build
