"""
Environment-driven settings.

Values are read once from the process environment (optionally seeded
from a .env file) and can be overridden per call by CLI flags, except
HYPERFOL_THREADS which takes precedence over --threads.
"""

import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

DEFAULT_OUTPUT_DIR = os.getenv("HYPERFOL_OUTPUT_DIR", "runs")
LOG_LEVEL = os.getenv("HYPERFOL_LOG_LEVEL", "INFO")


def _flag(name: str, default: str) -> bool:
    return os.environ.get(name, default).lower() in ("true", "1", "yes")


def deterministic_mode() -> bool:
    """Deterministic reductions are on unless explicitly disabled"""
    return _flag("HYPERFOL_DETERMINISTIC", "true")


def get_thread_count(cli_value: Optional[int] = None) -> int:
    """
    Resolve the worker thread count.

    Args:
        cli_value: value passed with --threads, if any

    Returns:
        HYPERFOL_THREADS when set, else the CLI value, else 1
    """
    env_value = os.getenv("HYPERFOL_THREADS")
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            pass
    if cli_value:
        return max(1, int(cli_value))
    return 1


def get_output_dir(cli_value: Optional[str] = None) -> str:
    return cli_value or os.getenv("HYPERFOL_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)
