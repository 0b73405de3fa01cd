"""
Run configuration and result schemas for hyperboloidal evolutions.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from models.grid import Grid, GridSlice
from models.system import SystemSpec
from utils.errors import UsageError

DATA_POINTS_PER_RADIUS = 8

STATUSES = ("completed", "quasilinear-breakdown", "instability-detected")


class ProfileSpec(BaseModel):
    """
    A spatial profile on the initial slice.

    kind is one of
      zero        identically 0
      bump        amplitude * (1 - |x - c|^2 / radius^2)^power inside the ball
      gaussian    amplitude * exp(-|x - c|^2 / radius^2), cut off at 3 radius
      expression  sympy text in x1, x2, x3
    """
    kind: str = "bump"
    amplitude: float = 1.0
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = Field(1.2, gt=0)
    power: int = Field(4, ge=2)
    expression: Optional[str] = None

    class Config:
        schema_extra = {
            "example": {"kind": "bump", "amplitude": 0.001, "center": [0, 0, 0], "radius": 1.2, "power": 4}
        }

    @validator("kind")
    def known_kind(cls, kind):
        if kind not in ("zero", "bump", "gaussian", "expression"):
            raise ValueError(f"unknown profile kind '{kind}'")
        return kind

    @root_validator(skip_on_failure=True)
    def expression_given(cls, values):
        if values["kind"] == "expression" and not values.get("expression"):
            raise ValueError("profile kind 'expression' needs an expression")
        return values

    @property
    def support_radius(self) -> float:
        """Radius of the smallest origin-centred ball holding the support"""
        if self.kind == "zero":
            return 0.0
        reach = self.radius if self.kind == "bump" else 3.0 * self.radius
        if self.kind == "expression":
            return float("inf")
        return float(np.linalg.norm(self.center)) + reach


class ComponentData(BaseModel):
    value: ProfileSpec = ProfileSpec()
    ds: ProfileSpec = ProfileSpec(kind="zero")


class InitialDataSpec(BaseModel):
    """
    Data on H_{s0}: either per-component profiles for w and d_s w, or an
    exact solution u_i(t, x1, x2, x3) restricted to the slice.
    """
    components: List[ComponentData] = []
    exact: Optional[List[str]] = None

    class Config:
        schema_extra = {
            "example": {"components": [{"value": {"kind": "bump", "amplitude": 1.0, "radius": 1.2},
                                        "ds": {"kind": "zero"}}]}
        }


class SolverConfig(BaseModel):
    s0: float = Field(2.0, gt=1.0)
    s_end: float = 15.0
    n: int = Field(96, ge=9)
    h: Optional[float] = Field(None, gt=0)
    extent: Optional[float] = Field(None, gt=0)
    cfl: float = Field(0.4, gt=0)
    ds: Optional[float] = Field(None, gt=0)
    order: int = 4
    spec: SystemSpec
    initial_data: InitialDataSpec = InitialDataSpec()
    forcing: Optional[List[str]] = None
    cadence: int = Field(1, ge=1)
    zi_order: int = Field(2, ge=0, le=3)
    blowup_factor: float = Field(1e4, gt=1)
    max_n: int = Field(320, ge=9)
    keep_snapshots: bool = False

    class Config:
        schema_extra = {
            "example": {
                "s0": 2.0,
                "s_end": 15.0,
                "n": 96,
                "cfl": 0.4,
                "order": 4,
                "spec": SystemSpec.Config.schema_extra["example"],
                "initial_data": InitialDataSpec.Config.schema_extra["example"],
                "cadence": 5,
                "zi_order": 2
            }
        }

    @validator("order")
    def supported_order(cls, order):
        if order not in (2, 4):
            raise ValueError(f"stencil order must be 2 or 4, got {order}")
        return order

    @validator("s_end")
    def range_increasing(cls, s_end, values):
        s0 = values.get("s0")
        if s0 is not None and s_end <= s0:
            raise ValueError(f"s_end={s_end} must exceed s0={s0}")
        return s_end

    @root_validator(skip_on_failure=True)
    def data_matches_spec(cls, values):
        spec, data, forcing = values["spec"], values["initial_data"], values.get("forcing")
        if data.exact is not None and len(data.exact) != spec.n0:
            raise ValueError(f"{len(data.exact)} exact solutions given for n0={spec.n0}")
        if data.exact is None and data.components and len(data.components) != spec.n0:
            raise ValueError(f"{len(data.components)} initial profiles given for n0={spec.n0}")
        if forcing is not None and len(forcing) != spec.n0:
            raise ValueError(f"{len(forcing)} forcing terms given for n0={spec.n0}")
        return values

    @property
    def margin_points(self) -> int:
        return self.order + 2

    @property
    def data_scale(self) -> float:
        """Narrowest profile radius, else the support radius of H_{s0}"""
        radii = [p.radius for c in self.initial_data.components for p in (c.value, c.ds)
                 if p.kind in ("bump", "gaussian")]
        return min(radii + [0.5 * (self.s0 ** 2 - 1.0)])

    def resolve_grid(self) -> Grid:
        """
        Lattice covering the support radius at s_end plus the stencil margin.
        An explicit h or extent wins. Otherwise n fixes the spacing, refined
        to data_scale / DATA_POINTS_PER_RADIUS (growing n) when that is coarser.

        Raises:
            UsageError: the lattice would need more than max_n points per axis
        """
        support = 0.5 * (self.s_end ** 2 - 1.0)
        margin = self.margin_points
        spacing = self.h
        if spacing is None and self.extent is None:
            # extent = support + margin * h with h = 2 extent / (n - 1)
            spacing = 2.0 * support / (self.n - 1 - 2.0 * margin)
            spacing = min(spacing, self.data_scale / DATA_POINTS_PER_RADIUS)
        if spacing is None:
            n, build = self.n, lambda: Grid(self.n, self.extent)
            spacing = 2.0 * self.extent / (n - 1)
        else:
            extent = self.extent or support + margin * spacing
            n, build = Grid.points_for(spacing, extent), lambda: Grid.from_spacing(spacing, extent)
        if n > self.max_n:
            raise UsageError(
                f"resolving the data on [{self.s0}, {self.s_end}] takes {n} points per axis "
                f"(h={spacing:.4g}), above max_n={self.max_n}; lower s_end or set h and max_n explicitly"
            )
        return build()


class RunConfig(BaseModel):
    command: str
    spec_path: Optional[str] = None
    config_path: Optional[str] = None
    preset: Optional[str] = None
    output_dir: str = "runs"
    solver: Optional[SolverConfig] = None
    selections: List[str] = ["all"]
    seed: int = 0
    threads: int = Field(1, ge=1)
    force: bool = False

    class Config:
        schema_extra = {
            "example": {"command": "evolve", "preset": "linear-kg", "output_dir": "runs/linear-kg", "seed": 0}
        }

    @validator("command")
    def known_command(cls, command):
        if command not in ("analyze", "evolve", "verify", "operators"):
            raise ValueError(f"unknown command '{command}'")
        return command


class EnergyReport(BaseModel):
    s: float
    energies: Dict[str, float] = {}
    curved_energy: Optional[float] = None
    coercive: bool = True
    zi_energies: Dict[str, float] = {}
    monitors: Dict[str, float] = {}
    l2_norms: Dict[str, float] = {}
    flux_integral: float = 0.0
    mms_error: Optional[float] = None

    @property
    def total_energy(self) -> float:
        return float(sum(self.energies.values()))


class FluxSample(BaseModel):
    s: float
    energy: float
    flux: float


class DecayFit(BaseModel):
    name: str = ""
    samples: int
    ratio: float
    slope: float
    bounded: bool
    factor: float


class EnergyIdentityResult(BaseModel):
    lhs: float
    rhs: float
    residual: float
    quadrature_error: float
    cadence_ok: bool
    records: int


class EvolutionResult(BaseModel):
    status: str = "completed"
    reports: List[EnergyReport] = []
    flux_trace: List[FluxSample] = []
    snapshots: List[GridSlice] = []
    final_s: float
    steps: int = 0
    message: str = ""
    worst_point: Optional[Tuple[float, ...]] = None
    timings: Dict[str, float] = {}

    class Config:
        arbitrary_types_allowed = True

    @validator("status")
    def known_status(cls, status):
        if status not in STATUSES:
            raise ValueError(f"unknown status '{status}'")
        return status

    @validator("reports")
    def s_increasing(cls, reports):
        values = [r.s for r in reports]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("report slices must be strictly increasing in s")
        return reports

    def series(self, key: str) -> List[Tuple[float, float]]:
        """(s, value) pairs for a monitor, energy or Z^I energy key"""
        out = []
        for report in self.reports:
            for table in (report.monitors, report.energies, report.zi_energies):
                if key in table:
                    out.append((report.s, table[key]))
                    break
        return out
