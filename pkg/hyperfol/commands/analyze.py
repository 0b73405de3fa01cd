"""
analyze: decide the structural conditions of a system spec and write
structure.yaml and structure.txt.
"""

import logging

from dependencies import get_system_spec
from models.run import RunConfig
from models.system import StructureReport
from services.nullstruct import check_structure
from storage.run_store import RunStore
from utils.helpers import EXIT_CHECK_FAILED, EXIT_OK, render_structure_report, structure_report_document

logger = logging.getLogger(__name__)


def analyze_spec(config: RunConfig, store: RunStore) -> StructureReport:
    spec = get_system_spec(config)
    report = check_structure(spec, seed=config.seed)
    store.write_yaml("structure.yaml", structure_report_document(report))
    store.write_text("structure.txt", render_structure_report(report))
    return report


def run(config: RunConfig, store: RunStore) -> int:
    report = analyze_spec(config, store)
    print(render_structure_report(report))
    if report.passed:
        logger.info(f"'{report.spec_name}' satisfies every structural condition")
        return EXIT_OK
    logger.warning(f"'{report.spec_name}' fails: {', '.join(report.failed_conditions())}")
    return EXIT_CHECK_FAILED
