"""
Tests for run metrics and logging setup
"""
import logging

import pytest

from services.monitoring import RunMetrics, configure_logging


@pytest.fixture
def root_logger():
    root = logging.getLogger()
    level, handlers = root.level, list(root.handlers)
    yield root
    root.handlers = handlers
    root.setLevel(level)


def test_summary_is_empty_after_reset():
    RunMetrics.record("rhs", 0.5)
    RunMetrics.reset()
    assert RunMetrics.summary() == {}


def test_record_keeps_running_totals_per_phase():
    for _ in range(1500):
        RunMetrics.record("rhs", 0.25)
    RunMetrics.record("step", 2.0)
    summary = RunMetrics.summary()
    assert summary == {"rhs": pytest.approx(375.0), "step": 2.0}


def test_summary_is_a_copy():
    RunMetrics.record("diagnostics", 1.0)
    RunMetrics.summary()["diagnostics"] = 99.0
    assert RunMetrics.summary() == {"diagnostics": 1.0}


def test_configure_logging_levels(root_logger):
    configure_logging(verbose=True)
    assert root_logger.level == logging.DEBUG
    configure_logging(level="warning")
    assert root_logger.level == logging.WARNING
    configure_logging(level="no-such-level")
    assert root_logger.level == logging.INFO
