"""
Slice functionals: hyperboloidal, curved and flat energies, L^p norms on
H_s, weighted sup decay monitors and the energy identity.

Integrals over H_s use the flat measure dx of the graph chart, summed
over the lattice. Fields vanish well inside the grid, so the plain sum
is the trapezoid rule.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

import settings
from models.grid import Grid, GridSlice
from models.run import DecayFit, EnergyIdentityResult, EnergyReport, FluxSample
from models.system import SystemSpec
from services import stencils
from services.fields import JetField, all_multi_indices
from services.geometry import frame_coefficient_fields
from services.jets import CoefficientTables, extend_jet, source_terms
from services.profiles import parse_expression, sample
from utils.errors import CadenceError, DiagnosticsMismatch, DomainError

logger = logging.getLogger(__name__)

FORM_TOLERANCE = 1e-10
COERCIVITY_LIMIT = 0.5
MIN_DECAY_SAMPLES = 5


def _integrate(values: np.ndarray, grid: Grid) -> float:
    if settings.deterministic_mode():
        return math.fsum(values.ravel()) * grid.cell_volume
    return float(np.sum(values)) * grid.cell_volume


def _component_index(slice_: GridSlice, component: Union[int, str]) -> int:
    if isinstance(component, str):
        if component not in slice_.components:
            raise DomainError(f"unknown component '{component}'")
        return slice_.components.index(component)
    if not 0 <= component < slice_.n0:
        raise DomainError(f"component index {component} outside 0..{slice_.n0 - 1}")
    return component


def natural_gradient(slice_: GridSlice, i: int, order: int = 4) -> np.ndarray:
    """(d_t w, d_1 w, d_2 w, d_3 w) at fixed t, from w and d_s w on H_s"""
    x, h, s = slice_.grid.x, slice_.grid.h, slice_.s
    out = np.empty((4,) + slice_.grid.shape)
    out[0] = slice_.dt_w[i]
    for a in range(3):
        out[a + 1] = stencils.derivative(slice_.w[i], a, h, order) - (x[a] / s) * slice_.ds_w[i]
    return out


def energy_density_forms(slice_: GridSlice, component: Union[int, str], c: float,
                         order: int = 4) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Three pointwise integrands of E_{m,c}(s, w):
      natural:   sum_a ((x^a/t) d_t w + d_a w)^2 + ((s/t) d_t w)^2 + c^2 w^2
      frame:     sum_a (dbar_a w)^2 + ((s/t) d_t w)^2 + c^2 w^2
      boost:     sum_a ((s/t) d_a w)^2 + t^-2 (S w)^2 + t^-2 sum_{a<b} (Omega_ab w)^2 + c^2 w^2
    with S = t d_t + x^a d_a and Omega_ab = x^a d_b - x^b d_a.
    """
    i = _component_index(slice_, component)
    grid, s, t = slice_.grid, slice_.s, slice_.t
    x = grid.x
    w = slice_.w[i]
    grad = natural_gradient(slice_, i, order)
    time_part = ((s / t) * grad[0]) ** 2
    mass_part = c * c * w ** 2
    natural = sum(((x[a] / t) * grad[0] + grad[a + 1]) ** 2 for a in range(3)) + time_part + mass_part
    frame = sum(stencils.derivative(w, a, grid.h, order) ** 2 for a in range(3)) + time_part + mass_part
    scaling = t * grad[0] + sum(x[a] * grad[a + 1] for a in range(3))
    rotations = sum((x[a] * grad[b + 1] - x[b] * grad[a + 1]) ** 2 for a in range(3) for b in range(a + 1, 3))
    boost = (sum(((s / t) * grad[a + 1]) ** 2 for a in range(3))
             + (scaling ** 2 + rotations) / t ** 2 + mass_part)
    return natural, frame, boost


def energy_hyperboloidal(slice_: GridSlice, component: Union[int, str], c: float, order: int = 4) -> float:
    """
    E_{m,c}(s, w_i), the frame form, checked against the natural form.

    Raises:
        DiagnosticsMismatch: when the two integrals disagree beyond rounding
    """
    natural, frame, _ = energy_density_forms(slice_, component, c, order)
    value = _integrate(frame, slice_.grid)
    check = _integrate(natural, slice_.grid)
    if abs(value - check) > FORM_TOLERANCE * max(abs(value), abs(check), 1e-300):
        raise DiagnosticsMismatch(f"energy forms disagree at s={slice_.s:.6g}: {value:.12e} vs {check:.12e}",
                                  s=slice_.s)
    return value


def energy_of_jet(jet: JetField, c: float) -> float:
    """E_{m,c} of a slice jet; dbar_a is the tangential grid derivative"""
    jet.require_depth(2, "the hyperboloidal energy")
    if jet.s is None:
        raise DomainError("hyperboloidal energy needs a jet on a hyperboloid")
    u0, u1 = jet.levels[0], jet.levels[1]
    density = (sum(stencils.derivative(u0, a, jet.grid.h, jet.order) ** 2 for a in range(3))
               + ((jet.s / jet.t) * u1) ** 2 + c * c * u0 ** 2)
    return _integrate(density, jet.grid)


def total_energy(slice_: GridSlice, spec: SystemSpec, order: int = 4) -> float:
    return float(sum(energy_hyperboloidal(slice_, i, spec.masses[i], order) for i in range(spec.n0)))


def energy_curved(slice_: GridSlice, spec: SystemSpec, order: int = 4,
                  tables: Optional[CoefficientTables] = None) -> Tuple[float, bool]:
    """
    E_G = E_m + 2 int G_i^{j ab} xibar_a d_t w_i d_b w_j - int G_i^{j ab} d_a w_i d_b w_j,
    xibar = (1, -x/t).

    Returns:
        (E_G, coercive) with coercive False when |E_G - E_m| > 0.5 E_m
    """
    tables = tables or CoefficientTables(spec)
    base = total_energy(slice_, spec, order)
    if not tables.quasilinear:
        return base, True
    grads = [natural_gradient(slice_, i, order) for i in range(spec.n0)]
    tau = frame_coefficient_fields(slice_.s, slice_.grid).tau
    xibar = np.concatenate([np.ones((1,) + slice_.grid.shape), -tau])
    density = np.zeros(slice_.grid.shape)

    def add(i, j, a, b, factor):
        return factor * (2.0 * xibar[a] * grads[i][0] * grads[j][b] - grads[i][a] * grads[j][b])

    for (i, j, a, b, g, l), value in tables.entries["A"]:
        density += add(i, j, a, b, value * grads[l][g])
    for (i, j, a, b, l), value in tables.entries["B"]:
        density += add(i, j, a, b, value * slice_.w[l])
    curved = base + _integrate(density, slice_.grid)
    coercive = abs(curved - base) <= COERCIVITY_LIMIT * base or (base == 0.0 and curved == 0.0)
    if not coercive:
        logger.warning(f"curved energy {curved:.6e} not comparable to E_m {base:.6e} at s={slice_.s:.6g}")
    return curved, coercive


def lp_norm_on_slice(u, s: float, p: Union[int, float], grid: Optional[Grid] = None) -> float:
    """
    ||u||_{L^p(H_s)} for p in {1, 2, inf}; u is a grid array or an
    expression in (t, x1, x2, x3) evaluated at t = sqrt(s^2 + |x|^2).
    """
    if p not in (1, 2, np.inf):
        raise DomainError(f"p must be 1, 2 or inf, got {p}")
    if isinstance(u, np.ndarray):
        values = u
    else:
        if grid is None:
            raise DomainError("an expression needs a grid to be sampled on")
        values = sample(parse_expression(u), np.sqrt(s * s + grid.r ** 2), grid)
    if p == np.inf:
        return float(np.max(np.abs(values))) if values.size else 0.0
    if grid is None:
        raise DomainError("finite p needs the grid spacing")
    return _integrate(np.abs(values) ** p, grid) ** (1.0 / p)


def weighted_monitors(slice_: GridSlice, spec: SystemSpec, order: int = 4) -> Dict[str, float]:
    """Weighted sup norms over the support, with weights evaluated analytically"""
    grid, s, t = slice_.grid, slice_.s, slice_.t
    region = slice_.support_mask & stencils.interior_mask(grid.shape, stencils.half_width(order))
    if not np.any(region):
        region = slice_.support_mask

    def sup(values: np.ndarray) -> float:
        return float(np.max(np.abs(values[region]))) if np.any(region) else 0.0

    monitors = {}
    for i, name in enumerate(slice_.components):
        w = slice_.w[i]
        if i < spec.j0:
            grad = natural_gradient(slice_, i, order)
            monitors[f"{name}.sup_t12_s_du"] = sup(np.sqrt(t) * s * np.max(np.abs(grad), axis=0))
            tangential = np.max(np.abs(np.stack([stencils.derivative(w, a, grid.h, order) for a in range(3)])), axis=0)
            monitors[f"{name}.sup_t32_dbar_u"] = sup(t ** 1.5 * tangential)
            monitors[f"{name}.sup_t32_over_s_u"] = sup(t ** 1.5 / s * w)
        else:
            monitors[f"{name}.sup_sigma_t32_v"] = spec.sigma * sup(t ** 1.5 * w)
    return monitors


def decay_monitor(series: Sequence[Tuple[float, float]], factor: float = 2.0, name: str = "") -> DecayFit:
    """
    Max/min ratio and log-log slope of a monitor series (s, value).

    Raises:
        DomainError: fewer than five samples
    """
    if len(series) < MIN_DECAY_SAMPLES:
        raise DomainError(f"decay monitor needs at least {MIN_DECAY_SAMPLES} samples, got {len(series)}")
    s = np.array([p[0] for p in series], dtype=float)
    values = np.abs(np.array([p[1] for p in series], dtype=float))
    if np.all(values == values[0]):
        return DecayFit(name=name, samples=len(series), ratio=1.0, slope=0.0, bounded=True, factor=factor)
    low = float(np.min(values))
    ratio = float(np.max(values)) / low if low > 0 else float("inf")
    positive = values > 0
    slope = float(np.polyfit(np.log(s[positive]), np.log(values[positive]), 1)[0]) if positive.sum() >= 2 else 0.0
    return DecayFit(name=name, samples=len(series), ratio=ratio, slope=slope, bounded=ratio < factor, factor=factor)


def mass_sandwich_check(e_sigma: float, e_c: float, c: float, sigma: float, rtol: float = 1e-12) -> bool:
    """E_{m,sigma} <= E_{m,c} <= (c/sigma)^2 E_{m,sigma} for c >= sigma"""
    if sigma <= 0 or c < sigma:
        raise DomainError(f"mass sandwich needs c >= sigma > 0, got c={c}, sigma={sigma}")
    slack = rtol * max(abs(e_sigma), abs(e_c), 1e-300)
    return e_sigma <= e_c + slack and e_c <= (c / sigma) ** 2 * e_sigma + slack


def flux_density(slice_: GridSlice, spec: SystemSpec, order: int = 4,
                 forcing: Optional[Sequence[sp.Expr]] = None,
                 tables: Optional[CoefficientTables] = None) -> float:
    """q(s) = sum_i int (s/t) d_t w_i S_i dx, so that d/ds (E_m / 2) = q"""
    tables = tables or CoefficientTables(spec)
    if forcing is None and not (tables.semilinear_terms or tables.quasilinear):
        return 0.0
    depth = 3 if tables.quasilinear else 2
    jets = extend_jet(slice_, spec, depth, order, forcing, tables)
    source = source_terms(jets, tables, forcing)
    weight = slice_.s / slice_.t
    return float(sum(_integrate(weight * slice_.dt_w[i] * source[i], slice_.grid) for i in range(spec.n0)))


def _trapezoid(s: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * np.sum((s[1:] - s[:-1]) * (q[1:] + q[:-1])))


def energy_identity_residual(trace: Sequence[FluxSample], tolerance: float = 1e-3) -> EnergyIdentityResult:
    """
    Compare E_m(s)/2 - E_m(s0)/2 with the integrated flux. The quadrature
    error is estimated by Richardson against every other record.

    Raises:
        CadenceError: fewer than three records
    """
    if len(trace) < 3:
        raise CadenceError(f"energy identity needs at least 3 flux records, got {len(trace)}")
    s = np.array([r.s for r in trace])
    energy = np.array([r.energy for r in trace])
    q = np.array([r.flux for r in trace])
    lhs = 0.5 * (energy[-1] - energy[0])
    rhs = _trapezoid(s, q)
    coarse_index = list(range(0, len(trace), 2))
    if coarse_index[-1] != len(trace) - 1:
        coarse_index.append(len(trace) - 1)
    coarse = _trapezoid(s[coarse_index], q[coarse_index])
    estimate = abs(rhs - coarse) / 3.0
    scale = energy[0] if energy[0] > 0 else float(np.max(np.abs(energy)))
    if scale == 0.0:
        return EnergyIdentityResult(lhs=lhs, rhs=rhs, residual=0.0, quadrature_error=0.0,
                                    cadence_ok=True, records=len(trace))
    error = estimate / scale
    return EnergyIdentityResult(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs) / scale, quadrature_error=error,
                                cadence_ok=error <= tolerance, records=len(trace))


def zi_energies(slice_: GridSlice, spec: SystemSpec, zi_order: int, order: int = 4,
                forcing: Optional[Sequence[sp.Expr]] = None,
                tables: Optional[CoefficientTables] = None) -> Dict[str, float]:
    """E_{m,c_i}(s, Z^I w_i) for every |I| <= zi_order, keyed 'name[L1.d0]'"""
    jets = extend_jet(slice_, spec, zi_order + 2, order, forcing, tables)
    energies: Dict[str, float] = {}
    for i, name in enumerate(slice_.components):
        cache: Dict[tuple, JetField] = {(): jets[i]}
        for I in all_multi_indices(zi_order):
            key = tuple(I.fields)
            if key not in cache:
                cache[key] = cache[key[1:]].apply(key[0])
            energies[f"{name}[{I.label.replace(',', '.')}]"] = energy_of_jet(cache[key], spec.masses[i])
    return energies


def flat_energy(snapshots: Sequence[GridSlice], t0: float, spec: SystemSpec, order: int = 4) -> float:
    """
    int_{t = t0} sum_i (|d w_i|^2 + c_i^2 w_i^2) dx, interpolating the stored
    slices in s at every point of the cone section r < t0 - 1.

    Raises:
        DomainError: t0 outside [(s0^2 + 1)/2, s_last]
    """
    if len(snapshots) < 2:
        raise DomainError("flat energy needs at least two stored slices")
    s_values = np.array([sn.s for sn in snapshots])
    low, high = 0.5 * (s_values[0] ** 2 + 1.0), s_values[-1]
    if not low <= t0 <= high:
        raise DomainError(f"t0={t0} outside the covered range [{low:.6g}, {high:.6g}]")
    grid = snapshots[0].grid
    region = grid.r < t0 - 1.0
    if not np.any(region):
        return 0.0
    s_point = np.sqrt(t0 * t0 - grid.r[region] ** 2)
    width = min(order, len(snapshots))
    start = np.clip(np.searchsorted(s_values, s_point) - width // 2, 0, len(snapshots) - width)

    cache: Dict[int, np.ndarray] = {}

    def fields_at(k: int) -> np.ndarray:
        # (n0, 5, points): w then the natural gradient, restricted to the region
        if k not in cache:
            sn = snapshots[k]
            cache[k] = np.stack([np.concatenate([sn.w[i][None], natural_gradient(sn, i, order)])[:, region]
                                 for i in range(sn.n0)])
        return cache[k]

    density = np.zeros(int(region.sum()))
    for first in np.unique(start):
        for k in [k for k in cache if k < first]:
            del cache[k]
        chosen = start == first
        nodes = s_values[first:first + width]
        target = s_point[chosen]
        total = 0.0
        for m in range(width):
            weight = np.ones_like(target)
            for n in range(width):
                if n != m:
                    weight *= (target - nodes[n]) / (nodes[m] - nodes[n])
            total = total + weight * fields_at(first + m)[:, :, chosen]
        masses = np.asarray(spec.masses, dtype=float)[:, None]
        density[chosen] = np.sum(total[:, 1:] ** 2, axis=1).sum(axis=0) + np.sum(masses ** 2 * total[:, 0] ** 2, axis=0)
    return _integrate(density, grid)


def build_energy_report(slice_: GridSlice, spec: SystemSpec, order: int = 4, zi_order: int = 0,
                        forcing: Optional[Sequence[sp.Expr]] = None,
                        tables: Optional[CoefficientTables] = None,
                        flux_integral: float = 0.0) -> EnergyReport:
    tables = tables or CoefficientTables(spec)
    energies = {name: energy_hyperboloidal(slice_, i, spec.masses[i], order)
                for i, name in enumerate(slice_.components)}
    for i, name in enumerate(slice_.components):
        c = spec.masses[i]
        if i >= spec.j0 and c >= spec.sigma:
            e_sigma = energy_hyperboloidal(slice_, i, spec.sigma, order)
            if not mass_sandwich_check(e_sigma, energies[name], c, spec.sigma, rtol=1e-9):
                logger.warning(f"mass sandwich violated for {name} at s={slice_.s:.6g}")
    curved, coercive = energy_curved(slice_, spec, order, tables)
    report = EnergyReport(
        s=slice_.s,
        energies=energies,
        curved_energy=curved,
        coercive=coercive,
        zi_energies=zi_energies(slice_, spec, zi_order, order, forcing, tables) if zi_order > 0 else {},
        monitors=weighted_monitors(slice_, spec, order),
        l2_norms={name: lp_norm_on_slice(slice_.w[i], slice_.s, 2, slice_.grid)
                  for i, name in enumerate(slice_.components)},
        flux_integral=flux_integral,
    )
    return report


ENERGY_BAND = (0.5, 2.0)
BOUNDED_FACTOR = 2.0
DECAY_WINDOW_START = 3.0


def energy_band_verdict(reports: Sequence[EnergyReport],
                        band: Tuple[float, float] = ENERGY_BAND) -> Dict[str, object]:
    """
    Track E(s, Z^I w)^{1/2} / E(s0, Z^I w)^{1/2} for every recorded energy
    (the plain energies when no Z^I energies were recorded).

    `growth` means the band is left above while the total ratio never
    decreases.
    """
    if not reports:
        raise DomainError("energy band verdict needs at least one report")
    first = reports[0]
    table = "zi_energies" if first.zi_energies else "energies"
    ratios: Dict[str, List[float]] = {}
    for key, e0 in getattr(first, table).items():
        if e0 > 0:
            ratios[key] = [math.sqrt(max(getattr(r, table).get(key, 0.0), 0.0) / e0) for r in reports]
    if not ratios:
        return {"within": True, "min_ratio": 1.0, "max_ratio": 1.0, "growth": False, "band": list(band)}
    low = min(min(v) for v in ratios.values())
    high = max(max(v) for v in ratios.values())
    total = np.array([r.total_energy for r in reports])
    monotone = bool(np.all(np.diff(total) >= -1e-12 * max(float(np.max(np.abs(total))), 1e-300)))
    return {
        "within": bool(band[0] <= low and high <= band[1]),
        "min_ratio": low,
        "max_ratio": high,
        "growth": bool(high > band[1] and monotone),
        "band": list(band),
        "worst_key": max(ratios, key=lambda k: max(abs(math.log(x)) if x > 0 else float("inf") for x in ratios[k])),
    }


def decay_verdicts(reports: Sequence[EnergyReport], factor: float = BOUNDED_FACTOR,
                   window_start: float = DECAY_WINDOW_START) -> Dict[str, DecayFit]:
    """
    Fit every decay monitor over s >= window_start, falling back to the
    whole run when the window holds fewer than five samples. Monitors with
    too few samples overall are skipped.
    """
    fits: Dict[str, DecayFit] = {}
    if not reports:
        return fits
    for key in reports[0].monitors:
        series = [(r.s, r.monitors[key]) for r in reports if key in r.monitors]
        windowed = [p for p in series if p[0] >= window_start]
        chosen = windowed if len(windowed) >= MIN_DECAY_SAMPLES else series
        if len(chosen) < MIN_DECAY_SAMPLES:
            logger.debug(f"skipping decay fit for {key}: {len(chosen)} samples")
            continue
        fits[key] = decay_monitor(chosen, factor, key)
    return fits
