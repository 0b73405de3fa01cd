"""
Shared inputs of the commands: the system spec and the solver
configuration, resolved from --spec, --config or --preset.
"""

import logging
from typing import Any, Dict

from models.run import RunConfig, SolverConfig
from models.system import SystemSpec
from services.presets import get_preset, get_preset_spec
from utils.errors import UsageError
from utils.spec_io import load_solver_config, load_system_spec, parse_model

logger = logging.getLogger(__name__)


def get_system_spec(config: RunConfig) -> SystemSpec:
    """
    The spec named on the command line. --spec wins over --config, which
    wins over --preset.
    """
    if config.spec_path:
        return load_system_spec(config.spec_path)
    if config.config_path:
        return load_solver_config(config.config_path).spec
    if config.preset:
        return get_preset_spec(config.preset)
    raise UsageError("give one of --spec, --config or --preset")


def get_solver_config(config: RunConfig, overrides: Dict[str, Any]) -> SolverConfig:
    """
    The solver configuration with CLI overrides (resolution, order, Z^I
    order, spec file) applied and re-validated.
    """
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if config.spec_path:
        overrides["spec"] = load_system_spec(config.spec_path).dict()
    if config.config_path:
        base = load_solver_config(config.config_path)
    elif config.preset:
        base = get_preset(config.preset)
    else:
        raise UsageError("evolve needs --config or --preset")
    solver = parse_model(SolverConfig, {**base.dict(), **overrides}) if overrides else base
    logger.debug(f"solver config: s0={solver.s0} s_end={solver.s_end} order={solver.order} h={solver.h}")
    return solver
