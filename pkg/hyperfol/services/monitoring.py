import logging
from typing import Dict, Optional

import settings

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(verbose: bool = False, level: Optional[str] = None) -> None:
    """
    Configure process-wide logging once.

    Args:
        verbose: force DEBUG regardless of the environment
        level: explicit level name, else HYPERFOL_LOG_LEVEL
    """
    name = "DEBUG" if verbose else (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format=LOG_FORMAT, force=True)
    logger.debug(f"Logging configured at {name}")


class RunMetrics:
    """
    Class to track per-phase wall times (rhs, step, diagnostics) of a run
    as running totals
    """
    _totals: Dict[str, float] = {}

    @classmethod
    def record(cls, phase: str, seconds: float) -> None:
        """Record one timed phase"""
        cls._totals[phase] = cls._totals.get(phase, 0.0) + seconds

    @classmethod
    def reset(cls) -> None:
        cls._totals = {}

    @classmethod
    def summary(cls) -> Dict[str, float]:
        """Total seconds per phase since the last reset"""
        return dict(cls._totals)
