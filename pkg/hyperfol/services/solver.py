"""
Evolution along the hyperboloidal foliation.

The state on H_s is (w, pi) with pi = d_s w in the evolution chart
(s, x), where d_t = (t/s) d_s and d_a = D_a - (x^a/s) d_s. In that chart

    box u = d_s^2 u + (2 x^a / s) d_s D_a u - Lap_D u + (3/s) d_s u

and the system becomes, per point,

    (I + Ghat^00) d_s^2 w = F + f - c^2 w - [(2x^a/s) D_a pi - Lap_D w + (3/s) pi]
                            - G^{ab} E_ab

with Ghat^00 = G^{ab} xi_a xi_b, xi = (t/s, -x/s), and E_ab the part of
d_a d_b w not proportional to d_s^2 w. Fields vanish for r >= (s^2 - 1)/2
and are hard-zeroed there after every step.
"""

import logging
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from models.grid import Grid, GridSlice
from models.run import EnergyReport, EvolutionResult, FluxSample, SolverConfig
from models.system import SystemSpec
from services import stencils
from services.diagnostics import build_energy_report, flux_density, total_energy
from services.fields import SPACETIME_SYMBOLS, JetField, check_point_margin, evaluate_expression
from services.geometry import slice_support_radius
from services.jets import CoefficientTables, extend_jet, principal_solve
from services.monitoring import RunMetrics
from services.profiles import (forcing_expressions, initial_fields, manufactured_forcing,
                               parse_expression, sample)
from utils.errors import DomainError, InstabilityDetected, QuasilinearBreakdown

logger = logging.getLogger(__name__)

__all__ = [
    "box_in_frame", "semi_hyperboloidal_box", "frame_box_field", "semi_frame_box_field",
    "HyperboloidalSystem", "rhs", "cfl_step", "step", "evolve", "extend_jet", "manufactured_forcing",
]


# Wave operator in the two frames ---------------------------------------------

def frame_box_field(jet: JetField) -> np.ndarray:
    """box u from evolution-chart data on H_s (jet needs three levels)"""
    if jet.s is None:
        raise DomainError("the evolution-chart wave operator needs a jet on a hyperboloid")
    jet.require_depth(3, "the evolution-chart wave operator")
    s, t, x, h, order = jet.s, jet.t, jet.grid.x, jet.grid.h, jet.order
    u0, u1, u2 = jet.levels[:3]
    pi = (s / t) * u1
    dss = (jet.grid.r ** 2 / t ** 3) * u1 + (s / t) ** 2 * u2
    mixed = sum(x[a] * stencils.derivative(pi, a, h, order) for a in range(3))
    return dss + (2.0 / s) * mixed - stencils.laplacian(u0, h, order) + (3.0 / s) * pi


def box_in_frame(jet: JetField, index: Tuple[int, int, int]) -> float:
    check_point_margin(jet, index, jet.hw)
    return float(frame_box_field(jet)[index])


def semi_frame_box_field(jet: JetField) -> np.ndarray:
    """
    box u = mbar^{ab} dbar_a dbar_b u + (3/t) d_t u, with mbar^00 = (s/t)^2,
    mbar^{0a} = x^a/t and mbar^{ab} = -delta. Valid on any graph chart.
    """
    jet.require_depth(3, "the semi-hyperboloidal wave operator")
    t, x = jet.t, jet.grid.x
    m00 = (t ** 2 - jet.grid.r ** 2) / t ** 2
    value = m00 * jet.levels[2] + (3.0 / t) * jet.levels[1]
    time_first = jet.partial(0)
    for a in range(1, 4):
        tangent = jet.semi_derivative(a)
        cross = tangent.levels[1] + time_first.semi_derivative(a).value
        value = value + (x[a - 1] / t) * cross - tangent.semi_derivative(a).value
    return value


def semi_hyperboloidal_box(jet: JetField, index: Tuple[int, int, int]) -> float:
    check_point_margin(jet, index, 2 * jet.hw)
    return float(semi_frame_box_field(jet)[index])


# Right-hand side -------------------------------------------------------------

class HyperboloidalSystem:
    """
    First-order-in-s form of a SystemSpec on a fixed grid.

    Args:
        spec: coefficient data
        grid: spatial lattice
        order: stencil order
        forcing: optional f_i(t, x) per component
    """

    def __init__(self, spec: SystemSpec, grid: Grid, order: int = 4,
                 forcing: Optional[Sequence[sp.Expr]] = None):
        self.spec = spec
        self.grid = grid
        self.order = order
        self.hw = stencils.half_width(order)
        self.margin = 2 * self.hw + 2
        self.tables = CoefficientTables(spec)
        self.forcing = list(forcing) if forcing is not None else None
        self._forcing_funcs = ([sp.lambdify(SPACETIME_SYMBOLS, f, modules="numpy") for f in self.forcing]
                               if self.forcing is not None else None)

    def active_box(self, s: float) -> Tuple[slice, slice, slice]:
        return self.grid.box(slice_support_radius(s), self.margin)

    def support_mask(self, s: float) -> np.ndarray:
        return self.grid.r < slice_support_radius(s)

    def rhs(self, s: float, w: np.ndarray, pi: np.ndarray,
            edge: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        d/ds of (w, pi), zero outside the support of H_edge.

        Args:
            edge: slice label fixing the support mask and active box, s when
                omitted. Every stage of one step must share it so the right-hand
                side stays smooth in s.
        """
        start_time = time.time()
        edge = s if edge is None else max(s, edge)
        box = self.active_box(edge)
        sel = (slice(None),) + box
        h, order = self.grid.h, self.order
        x = self.grid.x[sel]
        r = self.grid.r[box]
        t = np.sqrt(s * s + r ** 2)
        inside = r < slice_support_radius(edge)
        wb, pb = w[sel], pi[sel]
        n0 = self.tables.n0

        Dpi = [[stencils.derivative(pb[j], a, h, order) for a in range(3)] for j in range(n0)]
        acc = np.zeros_like(wb)
        for i in range(n0):
            transport = (2.0 / s) * sum(x[a] * Dpi[i][a] for a in range(3))
            acc[i] = (stencils.laplacian(wb[i], h, order) - transport - (3.0 / s) * pb[i]
                      - self.tables.masses[i] ** 2 * wb[i])
        if self._forcing_funcs is not None:
            for i, func in enumerate(self._forcing_funcs):
                acc[i] += evaluate_expression(func, t, x)

        if self.tables.semilinear_terms or self.tables.quasilinear:
            dw = np.empty((n0, 4) + wb.shape[1:])
            for j in range(n0):
                dw[j, 0] = (t / s) * pb[j]
                for a in range(3):
                    dw[j, a + 1] = stencils.derivative(wb[j], a, h, order) - (x[a] / s) * pb[j]
            for (i, a, b, j, l), value in self.tables.entries["P"]:
                acc[i] += value * dw[j, a] * dw[l, b]
            for (i, a, j, l), value in self.tables.entries["Q"]:
                acc[i] += value * dw[j, a] * wb[l]
            for (i, j, l), value in self.tables.entries["R"]:
                acc[i] += value * wb[j] * wb[l]

        if self.tables.quasilinear:
            acc = self._solve_quasilinear(s, acc, wb, pb, Dpi, dw, x, r, t, inside)

        acc = np.where(inside, acc, 0.0)
        dw_ds = np.where(self.support_mask(edge), pi, 0.0)
        dpi_ds = np.zeros_like(pi)
        dpi_ds[sel] = acc
        RunMetrics.record("rhs", time.time() - start_time)
        return dw_ds, dpi_ds

    def _solve_quasilinear(self, s, acc, wb, pb, Dpi, dw, x, r, t, inside):
        h, order = self.grid.h, self.order
        xi = np.concatenate([(t / s)[None], -x / s])
        cache: Dict[Tuple[int, int, int], np.ndarray] = {}

        def explicit(j: int, a: int, b: int) -> np.ndarray:
            a, b = min(a, b), max(a, b)
            if (j, a, b) in cache:
                return cache[(j, a, b)]
            p = pb[j]
            if b == 0:
                value = -(r ** 2 / s ** 3) * p
            elif a == 0:
                value = (t / s) * Dpi[j][b - 1] + (x[b - 1] * t / s ** 3) * p
            else:
                value = (-(x[a - 1] / s) * Dpi[j][b - 1] - (x[b - 1] / s) * Dpi[j][a - 1]
                         + stencils.mixed_derivative(wb[j], a - 1, b - 1, h, order)
                         - ((1.0 if a == b else 0.0) / s + x[a - 1] * x[b - 1] / s ** 3) * p)
            cache[(j, a, b)] = value
            return value

        n0 = self.tables.n0
        principal = np.zeros((n0, n0) + wb.shape[1:])
        for (i, j, a, b, g, l), value in self.tables.entries["A"]:
            factor = value * dw[l, g]
            acc[i] -= factor * explicit(j, a, b)
            principal[i, j] += factor * xi[a] * xi[b]
        for (i, j, a, b, l), value in self.tables.entries["B"]:
            factor = value * wb[l]
            acc[i] -= factor * explicit(j, a, b)
            principal[i, j] += factor * xi[a] * xi[b]
        solved = np.zeros_like(acc)
        solved[:, inside] = principal_solve(principal[:, :, inside], acc[:, inside], s, x[:, inside])
        return solved


def rhs(s: float, slice_: GridSlice, spec: SystemSpec, order: int = 4,
        forcing: Optional[Sequence[sp.Expr]] = None) -> Tuple[np.ndarray, np.ndarray]:
    return HyperboloidalSystem(spec, slice_.grid, order, forcing).rhs(s, slice_.w, slice_.ds_w)


# Time stepping ---------------------------------------------------------------

def cfl_step(s: float, grid: Grid, cfl: float = 0.4) -> float:
    """cfl * h * min of s/t over the support, reached at its edge t = (s^2 + 1)/2"""
    return cfl * grid.h * 2.0 * s / (s * s + 1.0)


def rk4_step(system: HyperboloidalSystem, s: float, w: np.ndarray, pi: np.ndarray,
             ds: float) -> Tuple[np.ndarray, np.ndarray]:
    """Classical RK4 with the support of H_{s+ds} frozen across the stages"""
    edge = s + ds
    k1w, k1p = system.rhs(s, w, pi, edge)
    k2w, k2p = system.rhs(s + 0.5 * ds, w + 0.5 * ds * k1w, pi + 0.5 * ds * k1p, edge)
    k3w, k3p = system.rhs(s + 0.5 * ds, w + 0.5 * ds * k2w, pi + 0.5 * ds * k2p, edge)
    k4w, k4p = system.rhs(s + ds, w + ds * k3w, pi + ds * k3p, edge)
    return (w + (ds / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w),
            pi + (ds / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p))


def _worst_point(grid: Grid, values: np.ndarray) -> Tuple[float, ...]:
    magnitude = np.where(np.isfinite(values), np.abs(values), np.inf)
    index = np.unravel_index(int(np.argmax(magnitude)), magnitude.shape)
    return tuple(float(grid.x[(a,) + index[-3:]]) for a in range(3))


def step(slice_: GridSlice, ds: float, system: HyperboloidalSystem,
         reference_max: Optional[float] = None, blowup_factor: float = 1e4) -> GridSlice:
    """
    One RK4 step from H_s to H_{s+ds}, then hard-zero outside the new support.

    Raises:
        InstabilityDetected: NaN/Inf, or max|w| beyond blowup_factor * reference_max
    """
    start_time = time.time()
    s_next = slice_.s + ds
    w, pi = rk4_step(system, slice_.s, slice_.w, slice_.ds_w, ds)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(pi))):
        where = _worst_point(system.grid, w if not np.all(np.isfinite(w)) else pi)
        raise InstabilityDetected(f"non-finite values at s={s_next:.6g}", s=s_next, worst_point=where)
    mask = system.support_mask(s_next)
    w = np.where(mask, w, 0.0)
    pi = np.where(mask, pi, 0.0)
    peak = float(np.max(np.abs(w))) if w.size else 0.0
    if reference_max is not None and peak > blowup_factor * reference_max:
        raise InstabilityDetected(
            f"max|w|={peak:.4g} exceeds {blowup_factor:g} x initial maximum at s={s_next:.6g}",
            s=s_next, worst_point=_worst_point(system.grid, w)
        )
    RunMetrics.record("step", time.time() - start_time)
    return GridSlice.from_frame_data(s_next, system.grid, w, pi, slice_.components)


# Driver ----------------------------------------------------------------------

def _requests_data(config: SolverConfig) -> bool:
    profiles = [p for c in config.initial_data.components for p in (c.value, c.ds)]
    return any(p.kind == "expression" or (p.kind != "zero" and p.amplitude != 0.0) for p in profiles)


def initial_slice(config: SolverConfig, grid: Grid) -> GridSlice:
    """
    Sample the initial data on H_{s0}, zero outside its support.

    Raises:
        DomainError: no lattice point inside the support, or nonzero
            profiles that sample to zero on the lattice
    """
    mask = grid.r < slice_support_radius(config.s0)
    if not np.any(mask):
        raise DomainError(f"no point of {grid} lies inside the support radius "
                          f"{slice_support_radius(config.s0):.4g} of H_{config.s0}; refine the grid")
    w, ds_w = initial_fields(config.initial_data, config.spec, config.s0, grid)
    if _requests_data(config) and not (np.any(w[:, mask]) or np.any(ds_w[:, mask])):
        raise DomainError(f"initial profiles sample to zero on {grid}; refine the grid")
    outside = float(np.max(np.abs(np.where(mask, 0.0, w)))) if w.size else 0.0
    if outside > 0.0:
        logger.warning(f"initial data reach outside the support of H_{config.s0}; "
                       f"discarding values up to {outside:.3g}")
    w = np.where(mask, w, 0.0)
    ds_w = np.where(mask, ds_w, 0.0)
    return GridSlice.from_frame_data(config.s0, grid, w, ds_w, config.spec.component_names)


def mms_error(slice_: GridSlice, exact: Sequence[sp.Expr]) -> float:
    errors = [np.max(np.abs(slice_.w[i] - sample(u, slice_.t, slice_.grid))) for i, u in enumerate(exact)]
    return float(max(errors))


def evolve(config: SolverConfig,
           on_report: Optional[Callable[[EnergyReport, GridSlice], None]] = None) -> EvolutionResult:
    """
    Run from H_{s0} to H_{s_end}. Breakdown statuses end the run early and
    keep every diagnostic gathered so far.

    Args:
        config: solver configuration
        on_report: called with each EnergyReport and its slice
    """
    spec = config.spec
    grid = config.resolve_grid()
    forcing = forcing_expressions(config.forcing, spec.n0)
    exact = [parse_expression(u) for u in config.initial_data.exact] if config.initial_data.exact else None
    system = HyperboloidalSystem(spec, grid, config.order, forcing)
    RunMetrics.reset()
    current = initial_slice(config, grid)
    reference = float(np.max(np.abs(current.w))) or 1.0
    logger.info(f"evolving '{spec.name}' on {grid} from s={config.s0} to s={config.s_end}")

    reports: List[EnergyReport] = []
    trace: List[FluxSample] = []
    snapshots: List[GridSlice] = []
    flux_integral = 0.0

    def record_flux(slice_: GridSlice) -> None:
        nonlocal flux_integral
        start_time = time.time()
        energy = total_energy(slice_, spec, config.order)
        q = flux_density(slice_, spec, config.order, forcing, system.tables)
        if trace:
            flux_integral += 0.5 * (slice_.s - trace[-1].s) * (q + trace[-1].flux)
        trace.append(FluxSample(s=slice_.s, energy=energy, flux=q))
        RunMetrics.record("diagnostics", time.time() - start_time)

    def record_report(slice_: GridSlice) -> None:
        start_time = time.time()
        report = build_energy_report(slice_, spec, order=config.order, zi_order=config.zi_order,
                                     forcing=forcing, tables=system.tables, flux_integral=flux_integral)
        if exact is not None:
            report.mms_error = mms_error(slice_, exact)
        reports.append(report)
        if config.keep_snapshots:
            snapshots.append(slice_)
        if on_report is not None:
            on_report(report, slice_)
        RunMetrics.record("diagnostics", time.time() - start_time)
        logger.info(f"s={slice_.s:.4f} E={report.total_energy:.6e} flux={flux_integral:.6e}")

    status, message, worst = "completed", "", None
    steps = 0
    final_s = current.s
    try:
        record_flux(current)
        record_report(current)
        while current.s < config.s_end - 1e-12:
            ds = config.ds or cfl_step(current.s, grid, config.cfl)
            ds = min(ds, config.s_end - current.s)
            current = step(current, ds, system, reference, config.blowup_factor)
            final_s = current.s
            steps += 1
            logger.debug(f"step {steps}: s={current.s:.6f} ds={ds:.4g} max|w|={np.max(np.abs(current.w)):.4g}")
            record_flux(current)
            if steps % config.cadence == 0 or current.s >= config.s_end - 1e-12:
                record_report(current)
        if reports[-1].s < current.s:
            record_report(current)
    except (QuasilinearBreakdown, InstabilityDetected) as exc:
        status, message, worst = exc.status, exc.message, exc.worst_point
        final_s = exc.s if exc.s is not None else final_s
        logger.error(f"run stopped with {status}: {message}")

    return EvolutionResult(status=status, reports=reports, flux_trace=trace, snapshots=snapshots,
                           final_s=final_s, steps=steps, message=message, worst_point=worst,
                           timings=RunMetrics.summary())
