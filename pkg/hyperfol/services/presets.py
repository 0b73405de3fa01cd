"""
Built-in systems and run configurations.

    linear-kg     box v + v = 0
    free-wave     box u = 0
    null-wave     box u = m^{ab} d_a u d_b u
    nonnull-wave  box u = (d_t u)^2
    wkg           box u = m^{ab} d_a u d_b u + v^2,  box v + v = (d_t u)^2
    forced-kg     box v + v = f with f manufactured from an exact solution
"""

import logging
from typing import Any, Callable, Dict, List, Sequence

from models.run import ComponentData, InitialDataSpec, ProfileSpec, SolverConfig
from models.system import SystemSpec
from services.profiles import manufactured_forcing, parse_expression, system_manufactured_forcing
from utils.errors import UsageError

logger = logging.getLogger(__name__)

DEFAULT_AMPLITUDE = 1e-3

# Presets that deliberately violate the structural conditions, run as comparisons
COMPARISON_PRESETS = ("nonnull-wave",)

FORCED_KG_SOLUTION = "cos(t)*Piecewise(((1 - (x1**2 + x2**2 + x3**2)/1.44)**6, x1**2 + x2**2 + x3**2 < 1.44), (0, True))"


def minkowski_entries(i: int, j: int, k: int) -> List:
    """P_i^{ab jk} = m^{ab}, the Q0 null form"""
    return [[[i, 0, 0, j, k], 1.0]] + [[[i, a, a, j, k], -1.0] for a in (1, 2, 3)]


def _bump(amplitude: float) -> ComponentData:
    return ComponentData(value=ProfileSpec(kind="bump", amplitude=amplitude, radius=1.2, power=4),
                         ds=ProfileSpec(kind="zero"))


def linear_kg() -> SolverConfig:
    spec = SystemSpec(name="linear-kg", n0=1, j0=0, masses=[1.0], sigma=1.0, components=["v"])
    return SolverConfig(spec=spec, s_end=15.0, initial_data=InitialDataSpec(components=[_bump(1.0)]))


def free_wave() -> SolverConfig:
    spec = SystemSpec(name="free-wave", n0=1, j0=1, masses=[0.0], components=["u"])
    return SolverConfig(spec=spec, s_end=15.0, initial_data=InitialDataSpec(components=[_bump(1.0)]))


def null_wave() -> SolverConfig:
    spec = SystemSpec(name="null-wave", n0=1, j0=1, masses=[0.0], components=["u"], P=minkowski_entries(1, 1, 1))
    return SolverConfig(spec=spec, s_end=20.0,
                        initial_data=InitialDataSpec(components=[_bump(DEFAULT_AMPLITUDE)]))


def nonnull_wave() -> SolverConfig:
    spec = SystemSpec(name="nonnull-wave", n0=1, j0=1, masses=[0.0], components=["u"], P=[[[1, 0, 0, 1, 1], 1.0]])
    return SolverConfig(spec=spec, s_end=20.0,
                        initial_data=InitialDataSpec(components=[_bump(DEFAULT_AMPLITUDE)]))


def wkg() -> SolverConfig:
    spec = SystemSpec(
        name="wkg", n0=2, j0=1, masses=[0.0, 1.0], sigma=1.0, components=["u", "v"],
        P=minkowski_entries(1, 1, 1) + [[[2, 0, 0, 1, 1], 1.0]],
        R=[[[1, 2, 2], 1.0]],
    )
    data = InitialDataSpec(components=[_bump(DEFAULT_AMPLITUDE), _bump(DEFAULT_AMPLITUDE)])
    return SolverConfig(spec=spec, s_end=15.0, initial_data=data)


def forced_kg() -> SolverConfig:
    spec = SystemSpec(name="forced-kg", n0=1, j0=0, masses=[1.0], sigma=1.0, components=["v"])
    forcing = manufactured_forcing(FORCED_KG_SOLUTION, 1.0)
    return SolverConfig(spec=spec, s_end=15.0, initial_data=InitialDataSpec(exact=[FORCED_KG_SOLUTION]),
                        forcing=[str(forcing)])


PRESETS: Dict[str, Callable[[], SolverConfig]] = {
    "linear-kg": linear_kg,
    "free-wave": free_wave,
    "null-wave": null_wave,
    "nonnull-wave": nonnull_wave,
    "wkg": wkg,
    "forced-kg": forced_kg,
}


def list_presets() -> List[str]:
    return list(PRESETS)


def get_preset(name: str, **overrides: Any) -> SolverConfig:
    """
    Build a preset configuration, re-validated with any overrides applied.

    Raises:
        UsageError: unknown preset name
    """
    if name not in PRESETS:
        raise UsageError(f"unknown preset '{name}'; choose from {', '.join(PRESETS)}")
    config = PRESETS[name]()
    if not overrides:
        return config
    return SolverConfig(**{**config.dict(), **overrides})


def get_preset_spec(name: str) -> SystemSpec:
    return get_preset(name).spec


def with_manufactured_solution(config: SolverConfig, exact: Sequence) -> SolverConfig:
    """Same system, started from and forced towards the given exact solutions"""
    forcing = system_manufactured_forcing(config.spec, exact)
    data = InitialDataSpec(exact=[str(parse_expression(u)) for u in exact])
    logger.debug(f"manufactured forcing for '{config.spec.name}': {forcing}")
    return SolverConfig(**{**config.dict(), "initial_data": data.dict(),
                           "forcing": [str(f) for f in forcing]})
