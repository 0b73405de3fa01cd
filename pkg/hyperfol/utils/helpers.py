import logging
from typing import Any, Dict, List, Sequence

import numpy as np

from models.system import StructureReport
from models.verification import VerificationReport
from utils.errors import LabError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1


def handle_lab_error(error: Exception) -> int:
    """
    Log an error consistently and map it to the process exit code
    """
    if isinstance(error, LabError):
        logger.error(f"{type(error).__name__}: {error.message}")
        return error.exit_code
    logger.exception(f"Unexpected error: {str(error)}")
    return 3


def to_plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into YAML-safe Python values"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Fixed-width text table"""
    cells = [[_cell(v) for v in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)),
             "  ".join("-" * w for w in widths)]
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "pass" if value else "FAIL"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def structure_report_document(report: StructureReport) -> Dict[str, Any]:
    return to_plain({
        "spec": report.spec_name,
        "passed": report.passed,
        "conditions": [
            {"name": c.name, "passed": c.passed, "offending": [list(o) for o in c.offending], "detail": c.detail}
            for c in report.conditions
        ],
        "null_certificates": [c.dict() for c in report.null_certificates],
        "frame_bounds": report.frame_bounds,
    })


def render_structure_report(report: StructureReport) -> str:
    rows = [(c.name, c.passed, ", ".join(str(o) for o in c.offending) or "-") for c in report.conditions]
    text = [f"Structure analysis: {report.spec_name}", format_table(("condition", "verdict", "offending"), rows)]
    if report.frame_bounds:
        text.append(format_table(("null form", "sup |Tbar^00| (t/s)^2"),
                                 sorted(report.frame_bounds.items())))
    return "\n\n".join(text)


def verification_report_document(report: VerificationReport) -> Dict[str, Any]:
    return to_plain({
        "selection": report.selection,
        "seed": report.seed,
        "passed": report.passed,
        "checks": [c.dict() for c in report.checks],
    })


def render_verification_report(report: VerificationReport) -> str:
    rows: List[tuple] = []
    for check in report.checks:
        measured = ", ".join(f"{k}={_cell(v)}" for k, v in check.measured.items())
        delta = "-" if check.refinement_delta is None else f"{check.refinement_delta:.3g}"
        rows.append((check.name, check.passed, delta, measured))
    return format_table(("check", "verdict", "refinement", "measured"), rows)
