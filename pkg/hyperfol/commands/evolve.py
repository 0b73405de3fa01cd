"""
evolve: gate on the structure analysis, run the solver and write the
energy and decay series, optional snapshots and summary.yaml.
"""

import logging
from typing import Any, Dict, Optional

import numpy as np

from dependencies import get_solver_config
from models.grid import GridSlice
from models.run import EnergyReport, EvolutionResult, RunConfig, SolverConfig
from services.diagnostics import decay_verdicts, energy_band_verdict, energy_identity_residual, flat_energy
from services.nullstruct import check_structure
from services.presets import COMPARISON_PRESETS
from services.solver import evolve
from storage.run_store import RunStore
from utils.errors import CadenceError, UsageError
from utils.helpers import EXIT_CHECK_FAILED, EXIT_OK, render_structure_report, structure_report_document

logger = logging.getLogger(__name__)

EXIT_BREAKDOWN = 3


def status_exit_code(status: str) -> int:
    return EXIT_OK if status == "completed" else EXIT_BREAKDOWN


def structure_gate(config: RunConfig, solver: SolverConfig, store: RunStore) -> bool:
    """
    True when the run may proceed. --force and the comparison presets skip
    the gate; the report is written either way.
    """
    report = check_structure(solver.spec, seed=config.seed)
    store.write_yaml("structure.yaml", structure_report_document(report))
    if report.passed:
        return True
    if config.force:
        logger.warning(f"structure analysis failed ({', '.join(report.failed_conditions())}); continuing (--force)")
        return True
    if config.preset in COMPARISON_PRESETS:
        logger.warning(f"'{config.preset}' is a comparison preset; evolving despite "
                       f"{', '.join(report.failed_conditions())}")
        return True
    print(render_structure_report(report))
    logger.error("structure analysis failed; rerun with --force to evolve anyway")
    return False


def summarize(result: EvolutionResult, solver: SolverConfig) -> Dict[str, Any]:
    verdicts: Dict[str, Any] = {}
    if result.reports:
        verdicts["energy_band"] = energy_band_verdict(result.reports)
        verdicts["growth"] = verdicts["energy_band"]["growth"]
        fits = decay_verdicts(result.reports)
        verdicts["decay"] = {key: fit.dict(exclude={"name"}) for key, fit in fits.items()}
        verdicts["decay_bounded"] = all(fit.bounded for fit in fits.values()) if fits else None
    try:
        identity: Optional[Dict[str, Any]] = energy_identity_residual(result.flux_trace).dict()
    except CadenceError as exc:
        logger.warning(f"energy identity skipped: {exc.message}")
        identity = None
    flat = None
    if len(result.snapshots) >= 2:
        low = 0.5 * (result.snapshots[0].s ** 2 + 1.0)
        high = result.snapshots[-1].s
        if high > low:
            flat = {f"{t0:.6g}": flat_energy(result.snapshots, t0, solver.spec, solver.order)
                    for t0 in np.linspace(low, high, 3)}
    mms = [r.mms_error for r in result.reports if r.mms_error is not None]
    return {
        "status": result.status,
        "exit_code": status_exit_code(result.status),
        "message": result.message,
        "final_s": result.final_s,
        "steps": result.steps,
        "worst_point": list(result.worst_point) if result.worst_point else None,
        "config": solver.dict(),
        "verdicts": verdicts,
        "energy_identity": identity,
        "mms_error": max(mms) if mms else None,
        "flat_energy": flat,
        "timings": result.timings,
    }


def run(config: RunConfig, store: RunStore) -> int:
    solver = config.solver
    if solver is None:
        raise UsageError("evolve needs a resolved solver config")
    if not structure_gate(config, solver, store):
        return EXIT_CHECK_FAILED

    written = []

    def on_report(report: EnergyReport, slice_: GridSlice) -> None:
        if solver.keep_snapshots:
            written.append(store.write_snapshot(slice_, f"snapshot_{len(written):04d}"))

    result = evolve(solver, on_report=on_report)
    if result.reports:
        store.write_energy_series(result.reports)
        store.write_decay_series(result.reports)
    else:
        logger.warning(f"no slice was recorded before {result.status}; energy and decay series skipped")
    summary = summarize(result, solver)
    store.write_yaml("summary.yaml", summary)
    logger.info(f"run {result.status} at s={result.final_s:.4f} after {result.steps} steps; "
                f"outputs in {store.root}")
    print(f"status: {result.status}  final s: {result.final_s:.4f}  steps: {result.steps}")
    band = summary["verdicts"].get("energy_band")
    if band:
        print(f"energy ratio range: [{band['min_ratio']:.4g}, {band['max_ratio']:.4g}]  "
              f"within band: {band['within']}  growth: {band['growth']}")
    return summary["exit_code"]


def resolve(config: RunConfig, resolution: Optional[float], order: Optional[int],
            zi_order: Optional[int], s_end: Optional[float] = None) -> RunConfig:
    """RunConfig with the solver config filled in from --config/--preset and overrides"""
    solver = get_solver_config(config, {"h": resolution, "order": order, "zi_order": zi_order, "s_end": s_end})
    return RunConfig(**{**config.dict(exclude={"solver"}), "solver": solver})
