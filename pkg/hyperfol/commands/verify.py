"""
verify: run a verification selection, print the check table and write
verification.yaml.
"""

import logging
from typing import Optional

from models.run import RunConfig
from services.verify import run_suite
from storage.run_store import RunStore
from utils.helpers import EXIT_CHECK_FAILED, EXIT_OK, render_verification_report, verification_report_document

logger = logging.getLogger(__name__)


def run(config: RunConfig, store: RunStore, resolution: Optional[float] = None, order: int = 4) -> int:
    checks = []
    passed = True
    for selection in config.selections:
        report = run_suite(selection, seed=config.seed, threads=config.threads, resolution=resolution, order=order)
        name = "verification.yaml" if len(config.selections) == 1 else f"verification_{selection}.yaml"
        store.write_yaml(name, verification_report_document(report))
        print(f"Verification: {selection} (seed {report.seed})")
        print(render_verification_report(report))
        checks.extend(report.checks)
        passed = passed and report.passed
    logger.info(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return EXIT_OK if passed else EXIT_CHECK_FAILED
