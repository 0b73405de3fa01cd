"""
Property checks for the functional inequalities and algebraic identities
the hyperboloidal method rests on.

Inequality "verification" means measuring finite empirical constants that
are stable under grid refinement. Identity checks are exact (sympy) or
discrete with a measured convergence order.
"""

import concurrent.futures
import logging
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

import settings
from models.grid import Grid, GridSlice
from models.run import ProfileSpec
from models.verification import (CheckResult, ConvergenceResult, HardyCheck, HomogeneityResult,
                                 SELECTIONS, TestFunctionFamily, VerificationReport)
from services import stencils
from services.commutators import (FrameDerivative, all_table_entries, boost_bracket, commutator_coefficients,
                                  commutator_expansion, entry_holds, expansion_holds, frame_commutator_expansion,
                                  generic_field, symbolic_apply, symbolic_apply_multi)
from services.diagnostics import lp_norm_on_slice, natural_gradient
from services.fields import (SPACETIME_SYMBOLS, T_SYMBOL, X1, X2, X3, AdmissibleField, JetField, MultiIndex,
                             all_multi_indices, boost, evaluate_expression, jet_from_expression, killing_residual)
from services.geometry import frame_matrices, point_from_tx, s_frame_transition, semi_frame_metric
from services.monitoring import RunMetrics
from services.nullstruct import (DEFAULT_SAMPLES, cone_sample, frame_bound_certificate, is_null_cubic,
                                 is_null_quadratic, minkowski_form)
from services.profiles import parse_expression, profile_expression, sample
from services.solver import frame_box_field, semi_frame_box_field
from utils.errors import DomainError, StencilMarginError, UsageError

logger = logging.getLogger(__name__)

REFINEMENT_TOLERANCE = 0.1
IDENTITY_TOLERANCE = 1e-12
INVARIANCE_TOLERANCE = 1e-9
NEAR_CONE_FLOOR = 0.05

R_SYMBOL = sp.sqrt(X1 ** 2 + X2 ** 2 + X3 ** 2)
S_SYMBOL = sp.sqrt(T_SYMBOL ** 2 - R_SYMBOL ** 2)

# name -> (expression, homogeneity degree)
HOMOGENEOUS_COEFFICIENTS: Dict[str, Tuple[sp.Expr, int]] = {
    "x1/t": (X1 / T_SYMBOL, 0),
    "x2/t": (X2 / T_SYMBOL, 0),
    "x3/t": (X3 / T_SYMBOL, 0),
    "s/t": (S_SYMBOL / T_SYMBOL, 0),
    "t/(t+r)": (T_SYMBOL / (T_SYMBOL + R_SYMBOL), 0),
    "Psi_1^0": (-X1 / T_SYMBOL, 0),
    "Psi_2^0": (-X2 / T_SYMBOL, 0),
    "Psi_3^0": (-X3 / T_SYMBOL, 0),
}

# smooth, non-polynomial fields for the discrete identity studies
TEST_FUNCTIONS: Dict[str, str] = {
    "gaussian": "cos(t)*exp(-((x1 - 0.3)**2 + x2**2 + (x3 + 0.2)**2))",
    "packet": "sin(t - x1)*exp(-(x2**2 + x3**2)/2)",
    "radial": "exp(-(x1**2 + x2**2 + x3**2)/2)/(1 + t**2/4)",
}


# Convergence helpers -----------------------------------------------------------

def convergence_slopes(errors: Sequence[float], ratio: float = 2.0) -> List[float]:
    """Observed orders log(e_k / e_{k+1}) / log(ratio) between successive refinements"""
    out = []
    for coarse, fine in zip(errors, errors[1:]):
        if coarse <= 0 or fine <= 0:
            out.append(float("inf") if fine < coarse else 0.0)
        else:
            out.append(float(np.log(coarse / fine) / np.log(ratio)))
    return out


class ConvergenceStudy:
    """
    Runs an error functional at spacings h, h/ratio, h/ratio^2, ...

    Args:
        name: label for the report
        error_at: maps a spacing to a non-negative error
        h0: coarsest spacing
        levels: number of resolutions
        ratio: refinement factor
    """

    def __init__(self, name: str, error_at: Callable[[float], float], h0: float,
                 levels: int = 3, ratio: float = 2.0):
        if levels < 2:
            raise UsageError("a convergence study needs at least two resolutions")
        self.name = name
        self.error_at = error_at
        self.spacings = [h0 / ratio ** k for k in range(levels)]
        self.ratio = ratio

    def run(self) -> ConvergenceResult:
        errors = [float(self.error_at(h)) for h in self.spacings]
        slopes = convergence_slopes(errors, self.ratio)
        positive = [(h, e) for h, e in zip(self.spacings, errors) if e > 0]
        if len(positive) >= 2:
            fitted = float(np.polyfit(np.log([p[0] for p in positive]), np.log([p[1] for p in positive]), 1)[0])
        else:
            fitted = float("inf")
        logger.debug(f"{self.name}: errors {errors}, slopes {slopes}")
        return ConvergenceResult(name=self.name, spacings=self.spacings, errors=errors,
                                 slopes=slopes, fitted_slope=fitted)


def _convergence_check(result: ConvergenceResult, order: int) -> CheckResult:
    threshold = order - 0.5
    finest = result.slopes[-1] if result.slopes else 0.0
    measured = {f"error_h{k}": e for k, e in enumerate(result.errors)}
    measured.update({"slope": finest, "fitted_slope": result.fitted_slope})
    # rounding-level errors at every resolution count as exact
    exact = max(result.errors) < 1e-9
    return CheckResult(name=result.name, passed=exact or finest >= threshold, measured=measured,
                       detail=f"needs slope >= {threshold}")


# Slice inequalities --------------------------------------------------------------

def _slice_t(s: float, grid: Grid) -> np.ndarray:
    return np.sqrt(s * s + grid.r ** 2)


def _require_margin(grid: Grid, order: int, applications: int) -> None:
    needed = applications * stencils.half_width(order)
    if 2 * needed + 1 >= grid.n:
        raise StencilMarginError(f"{applications} stencil applications need more than {grid.n} points per axis")


def sobolev_ratio(u: np.ndarray, s: float, grid: Grid, order: int = 4) -> float:
    """
    sup_{H_s} t^{3/2}|u| over sum_{|I|<=2} ||L^I u||_{L^2(H_s)}, boosts only.
    On the slice L_a = t dbar_a, which is the tangential grid derivative times t.
    """
    _require_margin(grid, order, 2)
    t = _slice_t(s, grid)
    lhs = float(np.max(t ** 1.5 * np.abs(u)))
    first = [t * stencils.derivative(u, a, grid.h, order) for a in range(3)]
    second = [t * stencils.derivative(f, b, grid.h, order) for f in first for b in range(3)]
    rhs = sum(lp_norm_on_slice(f, s, 2, grid) for f in [u] + first + second)
    if rhs == 0.0:
        return 0.0
    return lhs / rhs


def origin_cell_weight(h: float, nodes: int = 32) -> float:
    """
    Mean of r^{-2} over the cube [-h/2, h/2]^3, as 3K/h^2 with
    K = int_{[-1,1]^2} du dv / (1 + u^2 + v^2) by Gauss-Legendre.
    """
    points, weights = np.polynomial.legendre.leggauss(nodes)
    u, v = np.meshgrid(points, points, indexing="ij")
    K = float(np.sum(np.outer(weights, weights) / (1.0 + u ** 2 + v ** 2)))
    return 3.0 * K / h ** 2


def inverse_square_weight(grid: Grid) -> np.ndarray:
    """r^{-2} with the cell containing r = 0 replaced by its cell average"""
    with np.errstate(divide="ignore"):
        weight = 1.0 / grid.r ** 2
    weight[grid.r < 1e-12 * grid.h] = origin_cell_weight(grid.h)
    return weight


def hardy_flat_ratio(u: np.ndarray, s: float, grid: Grid, order: int = 4) -> float:
    """||r^{-1} u||_{L^2(H_s)} over sum_a ||dbar_a u||_{L^2(H_s)}"""
    _require_margin(grid, order, 1)
    lhs = lp_norm_on_slice(np.sqrt(inverse_square_weight(grid)) * u, s, 2, grid)
    rhs = sum(lp_norm_on_slice(stencils.derivative(u, a, grid.h, order), s, 2, grid) for a in range(3))
    if rhs == 0.0:
        return 0.0
    return float(lhs / rhs)


def synthetic_slices(expr, s_values: Sequence[float], grid: Grid, name: str = "u") -> List[GridSlice]:
    """The same profile f(x) on every H_s, so d_s w = 0 in the evolution chart"""
    values = sample(profile_expression(expr) if isinstance(expr, ProfileSpec) else parse_expression(expr),
                    np.zeros(grid.shape), grid)
    return [GridSlice.from_frame_data(s, grid, values[None].copy(), np.zeros((1,) + grid.shape), [name])
            for s in s_values]


def hardy_hyperboloidal_check(slices: Sequence[GridSlice], component: int = 0, order: int = 4) -> HardyCheck:
    """
    ||u/s||(s) against ||u/s0||(s0) + sum_a ||dbar_a u||(s)
    + int_{s0}^{s} tau^{-1} sum_a (||(tau/t) d_a u|| + ||dbar_a u||) dtau, all constants 1.
    """
    if len(slices) < 2:
        raise DomainError("the hyperboloidal Hardy check needs slices covering [s0, s]")
    first, last = slices[0], slices[-1]
    grid = first.grid

    def tangential(sl: GridSlice) -> float:
        return sum(lp_norm_on_slice(stencils.derivative(sl.w[component], a, grid.h, order), sl.s, 2, grid)
                   for a in range(3))

    integrand = []
    for sl in slices:
        grad = natural_gradient(sl, component, order)
        natural = sum(lp_norm_on_slice((sl.s / sl.t) * grad[a + 1], sl.s, 2, grid) for a in range(3))
        integrand.append((natural + tangential(sl)) / sl.s)
    s_values = np.array([sl.s for sl in slices])
    integral = float(0.5 * np.sum(np.diff(s_values) * (np.array(integrand[1:]) + np.array(integrand[:-1]))))
    lhs = lp_norm_on_slice(last.w[component], last.s, 2, grid) / last.s
    rhs = lp_norm_on_slice(first.w[component], first.s, 2, grid) / first.s + tangential(last) + integral
    return HardyCheck(lhs=lhs, rhs=rhs, ratio=lhs / rhs if rhs > 0 else 0.0)


# Homogeneous coefficients -------------------------------------------------------

def _lambdify(expr: sp.Expr):
    return sp.lambdify(SPACETIME_SYMBOLS, expr, modules="numpy")


def _evaluate_on(func, points: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        values = func(points[:, 0], points[:, 1], points[:, 2], points[:, 3])
    return np.broadcast_to(np.asarray(values, dtype=float), points[:, 0].shape)


def homogeneity_check(name: str, translations: Optional[MultiIndex] = None, fields: Optional[MultiIndex] = None,
                      sample_points: Optional[np.ndarray] = None, scale: float = 2.0, seed: int = 0) -> HomogeneityResult:
    """
    sup over a cone sample of |d^{I1} Z^{I2} f| t^{-degree}, where degree is
    the exact homogeneity of d^{I1} Z^{I2} f: each translation lowers it by one.
    The constant is recomputed on the sample rescaled by `scale`.

    Raises:
        DomainError: unknown coefficient, a boost in I1, or |I1| + |I2| > 3
    """
    if name not in HOMOGENEOUS_COEFFICIENTS:
        raise DomainError(f"unknown coefficient '{name}'; known: {', '.join(HOMOGENEOUS_COEFFICIENTS)}")
    translations = translations or MultiIndex.identity()
    fields = fields or MultiIndex.identity()
    if any(z.is_boost for z in translations.fields):
        raise DomainError(f"{translations.label} must contain translations only")
    if translations.order + fields.order > 3:
        raise DomainError("total derivative order |I1| + |I2| must be at most 3")
    expr, eta = HOMOGENEOUS_COEFFICIENTS[name]
    derived = symbolic_apply_multi(translations.fields, symbolic_apply_multi(fields.fields, expr))
    degree = eta - translations.order - sum(1 for z in fields.fields if not z.is_boost)
    func = _lambdify(derived)
    points = sample_points if sample_points is not None else cone_sample(2000, seed=seed)

    def constant(pts: np.ndarray) -> float:
        return float(np.max(np.abs(_evaluate_on(func, pts)) * pts[:, 0] ** (-degree)))

    base = constant(points)
    rescaled = constant(scale * points)
    return HomogeneityResult(coefficient=name, degree=degree, translations=translations.label, fields=fields.label,
                             constant=base, rescaled_constant=rescaled, scale=scale,
                             invariant=abs(base - rescaled) <= INVARIANCE_TOLERANCE * max(1.0, abs(base)))


def xi_constants(max_order: int = 2, sample_points: Optional[np.ndarray] = None, seed: int = 0) -> Dict[str, float]:
    """sup of |(t/s) Z^I (s/t)| over cone points with s/t >= 0.05"""
    points = sample_points if sample_points is not None else cone_sample(2000, seed=seed, min_ratio=NEAR_CONE_FLOOR)
    ratio = S_SYMBOL / T_SYMBOL
    out = {}
    for I in all_multi_indices(max_order):
        func = _lambdify(symbolic_apply_multi(I.fields, ratio) / ratio)
        out[I.label] = float(np.max(np.abs(_evaluate_on(func, points))))
    return out


# Commutator tables ---------------------------------------------------------------

EXPANSION_SAMPLES = ("L1", "d0", "L2,L1", "L1,d2", "d3,L3")


def commutator_symbolic_checks() -> List[CheckResult]:
    entries = all_table_entries()
    failures = [f"[{e.field}, {e.derivative}]" for e in entries if not entry_holds(e)]
    results = [CheckResult(name="commutator table", passed=not failures,
                           measured={"entries": float(len(entries)), "failures": float(len(failures))},
                           detail=", ".join(failures))]

    u = generic_field()
    bracket_failures = []
    for a in (1, 2, 3):
        for b in (1, 2, 3):
            if a == b:
                continue
            c_b, c_a = boost_bracket(a, b)
            lhs = symbolic_apply(boost(a), symbolic_apply(boost(b), u)) - symbolic_apply(boost(b), symbolic_apply(boost(a), u))
            rhs = c_b * symbolic_apply(boost(b), u) + c_a * symbolic_apply(boost(a), u)
            if sp.simplify(sp.expand(lhs - rhs)) != 0:
                bracket_failures.append(f"[L{a}, L{b}]")
    results.append(CheckResult(name="boost bracket", passed=not bracket_failures,
                               detail=", ".join(bracket_failures)))

    expansion_failures = []
    for label in EXPANSION_SAMPLES:
        I = MultiIndex.parse(label)
        for alpha in range(4):
            if not expansion_holds(I, FrameDerivative(frame="natural", index=alpha), commutator_expansion(I, alpha)):
                expansion_failures.append(f"[{label}, d{alpha}]")
        for b in (1, 2, 3):
            if not expansion_holds(I, FrameDerivative(frame="semi", index=b), frame_commutator_expansion(I, b)):
                expansion_failures.append(f"[{label}, dbar{b}]")
    results.append(CheckResult(name="commutator expansions", passed=not expansion_failures,
                               measured={"multi_indices": float(len(EXPANSION_SAMPLES))},
                               detail=", ".join(expansion_failures)))
    return results


def _flat_jet(expr: str, h: float, depth: int, order: int, t0: float = 3.0, extent: float = 1.5) -> JetField:
    return jet_from_expression(expr, Grid.from_spacing(h, extent), depth, order, t0=t0)


def frame_commutator_residual(a: int, b: int, expr: str, h: float, order: int = 4, t0: float = 3.0) -> float:
    """max |[L_a, dbar_b] u - Thetabar_{ab}^c dbar_c u| over the valid interior"""
    u = _flat_jet(expr, h, 3, order, t0)
    lhs = u.semi_derivative(b).boost(a).plus(u.boost(a).semi_derivative(b), -1.0)
    entry = commutator_coefficients(boost(a), FrameDerivative(frame="semi", index=b))
    rhs = np.zeros(u.grid.shape)
    for gamma, coefficient in entry.nonzero().items():
        values = evaluate_expression(_lambdify(coefficient), u.t, u.grid.x)
        derived = u.partial(0) if gamma == 0 else u.semi_derivative(gamma)
        rhs = rhs + values * derived.value
    mask = stencils.interior_mask(u.grid.shape, lhs.margin + 1)
    return float(np.max(np.abs(lhs.value - rhs)[mask]))


def killing_study(field_name: str, expr: str, h0: float, order: int = 4) -> ConvergenceResult:
    Z = AdmissibleField.parse(field_name)
    return ConvergenceStudy(f"[{field_name}, box] on {expr}",
                            lambda h: killing_residual(Z, _flat_jet(expr, h, 4, order)), h0).run()


# Wave-operator decompositions ---------------------------------------------------

EVOLUTION_BOX_TEXT = "box u = d_s^2 u + (2 x^a/s) d_s d_a u - sum_a d_a d_a u + (3/s) d_s u"


def evolution_box_identity(expr: str = TEST_FUNCTIONS["gaussian"], samples: int = 64, seed: int = 0) -> float:
    """
    Relative max deviation between the evolution-chart form of box, applied
    to u(sqrt(s^2 + r^2), x) symbolically, and the direct-chart box u at
    random cone points.
    """
    u = parse_expression(expr)
    s = sp.Symbol("s", positive=True)
    xs = (X1, X2, X3)
    U = u.subs(T_SYMBOL, sp.sqrt(s ** 2 + X1 ** 2 + X2 ** 2 + X3 ** 2))
    chart = (sp.diff(U, s, 2) + sum(2 * x / s * sp.diff(U, s, x) for x in xs)
             - sum(sp.diff(U, x, 2) for x in xs) + 3 / s * sp.diff(U, s))
    direct = sp.diff(u, T_SYMBOL, 2) - sum(sp.diff(u, x, 2) for x in xs)
    points = cone_sample(samples, seed=seed, t_range=(1.5, 6.0), min_ratio=NEAR_CONE_FLOOR)
    t, x = points[:, 0], points[:, 1:].T
    s_values = np.sqrt(t ** 2 - np.sum(x ** 2, axis=0))
    chart_func = sp.lambdify((s, X1, X2, X3), chart, "numpy")
    with np.errstate(all="ignore"):
        chart_values = np.broadcast_to(np.asarray(chart_func(s_values, *x), dtype=float), t.shape)
    direct_values = _evaluate_on(_lambdify(direct), points)
    scale = max(1.0, float(np.max(np.abs(direct_values))))
    return float(np.max(np.abs(chart_values - direct_values))) / scale


def box_error(expr: str, h: float, kind: str, order: int = 4, s: float = 3.0, extent: float = 1.5) -> float:
    """max |box u - reference| for the evolution-chart ("frame") or semi-frame ("semi") decomposition"""
    grid = Grid.from_spacing(h, extent)
    jet = jet_from_expression(expr, grid, 3, order, s=s)
    u = parse_expression(expr)
    exact_expr = sp.diff(u, T_SYMBOL, 2) - sum(sp.diff(u, x, 2) for x in (X1, X2, X3))
    exact = evaluate_expression(_lambdify(exact_expr), jet.t, grid.x)
    if kind == "frame":
        computed, margin = frame_box_field(jet), jet.hw
    elif kind == "semi":
        computed, margin = semi_frame_box_field(jet), 2 * jet.hw
    else:
        raise UsageError(f"unknown decomposition '{kind}'")
    mask = stencils.interior_mask(grid.shape, margin + 1)
    return float(np.max(np.abs(computed - exact)[mask]))


# Suites ----------------------------------------------------------------------------

def frames_suite(samples: int = 10000, seed: int = 0) -> List[CheckResult]:
    points = cone_sample(samples, seed=seed)
    frame_error = metric_error = transition_error = 0.0
    for row in points:
        p = point_from_tx(row[0], row[1:])
        matrices = frame_matrices(p)
        frame_error = max(frame_error, float(np.max(np.abs(matrices.phi @ matrices.psi - np.eye(4)))))
        metric = semi_frame_metric(p)
        metric_error = max(metric_error, float(np.max(np.abs(metric.m_up @ metric.m_down - np.eye(4)))))
        # d_s = (s/t) d_t and the tangential derivatives are the semi-frame ones
        transition = s_frame_transition(p)
        expected = matrices.psi @ np.diag([p.t / p.s, 1.0, 1.0, 1.0])
        scale = max(1.0, float(np.max(np.abs(expected))))
        transition_error = max(transition_error, float(np.max(np.abs(transition - expected))) / scale)
    return [
        CheckResult(name="frame matrices inverse", passed=frame_error < IDENTITY_TOLERANCE,
                    measured={"max_error": frame_error, "samples": float(samples)}),
        CheckResult(name="semi-frame metric inverse", passed=metric_error < IDENTITY_TOLERANCE,
                    measured={"max_error": metric_error, "samples": float(samples)}),
        CheckResult(name="evolution-chart transition", passed=transition_error < IDENTITY_TOLERANCE,
                    measured={"max_error": transition_error, "samples": float(samples)}),
    ]


def operators_suite(h0: float = 0.2, order: int = 4) -> List[CheckResult]:
    deviation = evolution_box_identity()
    results = [CheckResult(name="evolution-chart box identity", passed=deviation < INVARIANCE_TOLERANCE,
                           measured={"relative_error": deviation}, detail=EVOLUTION_BOX_TEXT)]
    for name, expr in TEST_FUNCTIONS.items():
        for kind in ("frame", "semi"):
            study = ConvergenceStudy(f"{kind} box on {name}", lambda h, e=expr, k=kind: box_error(e, h, k, order), h0)
            results.append(_convergence_check(study.run(), order))
    return results


def commutators_suite(h0: float = 0.2, order: int = 4, symbolic: bool = True) -> List[CheckResult]:
    results = commutator_symbolic_checks() if symbolic else []
    expr = TEST_FUNCTIONS["gaussian"]
    for a, b in ((1, 1), (1, 2), (3, 2)):
        study = ConvergenceStudy(f"[L{a}, dbar{b}] on gaussian",
                                 lambda h, a=a, b=b: frame_commutator_residual(a, b, expr, h, order), h0)
        results.append(_convergence_check(study.run(), order))
    for field_name in ("d1", "L1", "L3"):
        results.append(_convergence_check(killing_study(field_name, expr, h0, order), order))
    return results


# kind -> whether forms of that kind are null
FORM_KINDS = {"null": True, "generic": False, "perturbed-null": False}
NULL_PERTURBATION = 1e-6


def _random_quadratic(rng: np.random.Generator, kind: str) -> np.ndarray:
    if kind == "generic":
        return rng.normal(size=(4, 4))
    antisymmetric = rng.normal(size=(4, 4))
    form = rng.normal() * minkowski_form().coefficients + (antisymmetric - antisymmetric.T)
    if kind == "perturbed-null":
        form = form + NULL_PERTURBATION * rng.normal(size=(4, 4))
    return form


def _random_cubic(rng: np.random.Generator, kind: str) -> np.ndarray:
    if kind == "generic":
        return rng.normal(size=(4, 4, 4))
    m = minkowski_form().coefficients
    antisymmetric = rng.normal(size=(4, 4, 4))
    form = np.einsum("ab,c->abc", m, rng.normal(size=4)) + (antisymmetric - np.swapaxes(antisymmetric, 0, 1))
    if kind == "perturbed-null":
        form = form + NULL_PERTURBATION * rng.normal(size=(4, 4, 4))
    return form


def null_suite(quadratic: int = 200, cubic: int = 100, samples: int = DEFAULT_SAMPLES,
               seed: int = 0) -> List[CheckResult]:
    """
    Exact null decisions against brute-force sampling on random null,
    generic and perturbed-null forms, taken in turn.
    """
    rng = np.random.default_rng(seed)
    kinds = list(FORM_KINDS)
    disagreements = {kind: 0 for kind in kinds}
    for count, classify, build in ((quadratic, is_null_quadratic, _random_quadratic),
                                   (cubic, is_null_cubic, _random_cubic)):
        for k in range(count):
            kind = kinds[k % len(kinds)]
            decided, certificate = classify(build(rng, kind), samples=samples, seed=seed + k)
            disagreements[kind] += int(decided != FORM_KINDS[kind] or not certificate.sampling_agrees)
    total = sum(disagreements.values())
    bound = frame_bound_certificate(minkowski_form(), cone_sample(10000, seed=seed))
    return [
        CheckResult(name="null classifier agrees with sampling", passed=total == 0,
                    measured={"forms": float(quadratic + cubic), "directions": float(samples),
                              "disagreements": float(total),
                              **{f"disagreements[{kind}]": float(n) for kind, n in disagreements.items()}}),
        CheckResult(name="frame bound of Q0", passed=abs(bound.constant - 1.0) < IDENTITY_TOLERANCE,
                    measured={"constant": bound.constant}),
    ]


def _family_constants(profiles: Sequence[ProfileSpec], s: float, h: float, order: int,
                      threads: int) -> Tuple[List[float], List[float]]:
    extent = 0.5 * (s * s - 1.0) + (order + 2) * h
    grid = Grid.from_spacing(h, extent)
    t = _slice_t(s, grid)

    def measure(profile: ProfileSpec) -> Tuple[float, float]:
        u = sample(profile_expression(profile), t, grid)
        return sobolev_ratio(u, s, grid, order), hardy_flat_ratio(u, s, grid, order)

    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        pairs = list(executor.map(measure, profiles))
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _refinement_check(name: str, coarse: List[float], fine: List[float]) -> CheckResult:
    c_coarse, c_fine = max(coarse), max(fine)
    delta = abs(c_fine - c_coarse) / c_fine if c_fine > 0 else 0.0
    median = float(np.median(fine))
    envelope = c_fine <= 3.0 * median if median > 0 else True
    return CheckResult(name=name, passed=bool(np.isfinite(c_fine) and delta < REFINEMENT_TOLERANCE and envelope),
                       measured={"constant": c_fine, "coarse_constant": c_coarse, "median": median,
                                 "within_envelope": float(envelope)},
                       refinement_delta=delta)


def inequalities_suite(family: Optional[TestFunctionFamily] = None, h0: float = 0.2, order: int = 4,
                       threads: int = 1) -> List[CheckResult]:
    family = family or TestFunctionFamily()
    profiles = family.profiles()
    sob_coarse, hardy_coarse = _family_constants(profiles, family.s, h0, order, threads)
    sob_fine, hardy_fine = _family_constants(profiles, family.s, h0 / 2, order, threads)
    results = [_refinement_check("sobolev constant", sob_coarse, sob_fine),
               _refinement_check("flat hardy constant", hardy_coarse, hardy_fine)]

    grid = Grid.from_spacing(h0, 0.5 * (family.s ** 2 - 1.0) + (order + 2) * h0)
    s_values = np.linspace(family.s, family.s + 2.0, 9)
    hyper = [hardy_hyperboloidal_check(synthetic_slices(p, s_values, grid), order=order).ratio
             for p in profiles[:min(10, len(profiles))]]
    results.append(CheckResult(name="hyperboloidal hardy constant", passed=bool(np.all(np.isfinite(hyper))),
                               measured={"constant": float(max(hyper))}))

    points = cone_sample(2000, seed=family.seed)
    homogeneity = []
    for coefficient in HOMOGENEOUS_COEFFICIENTS:
        for translations, fields in (("id", "id"), ("d0", "L1"), ("d1,d2", "L3"), ("id", "L1,L2")):
            homogeneity.append(homogeneity_check(coefficient, MultiIndex.parse(translations),
                                                 MultiIndex.parse(fields), points))
    variant = [f"{r.coefficient} d[{r.translations}] Z[{r.fields}]" for r in homogeneity if not r.invariant]
    results.append(CheckResult(name="homogeneity constants", passed=not variant,
                               measured={"checks": float(len(homogeneity)),
                                         "max_constant": max(r.constant for r in homogeneity)},
                               detail=", ".join(variant)))

    xi = xi_constants(2, seed=family.seed)
    results.append(CheckResult(name="(t/s) Z^I (s/t) bounded", passed=bool(np.all(np.isfinite(list(xi.values())))),
                               measured={"max": max(xi.values()), "multi_indices": float(len(xi))}))
    return results


def run_suite(selection: str = "all", seed: int = 0, threads: Optional[int] = None,
              resolution: Optional[float] = None, order: int = 4) -> VerificationReport:
    """
    Run one verification selection and aggregate its checks.

    Raises:
        UsageError: unknown selection
    """
    if selection not in SELECTIONS:
        raise UsageError(f"unknown selection '{selection}'; choose from {', '.join(SELECTIONS)}")
    threads = settings.get_thread_count(threads)
    h0 = resolution or 0.2
    suites: Dict[str, Callable[[], List[CheckResult]]] = {
        "frames": lambda: frames_suite(seed=seed),
        "operators": lambda: operators_suite(h0, order),
        "commutators": lambda: commutators_suite(h0, order),
        "null": lambda: null_suite(seed=seed),
        "inequalities": lambda: inequalities_suite(TestFunctionFamily(seed=seed), h0, order, threads),
    }
    chosen = list(suites) if selection == "all" else [selection]
    checks: List[CheckResult] = []
    for name in chosen:
        start_time = time.time()
        checks.extend(suites[name]())
        RunMetrics.record(f"verify:{name}", time.time() - start_time)
        logger.info(f"verification suite '{name}' finished in {time.time() - start_time:.2f}s")
    report = VerificationReport(selection=selection, checks=checks, seed=seed)
    if not report.passed:
        logger.warning(f"verification failures: {', '.join(report.failed_checks())}")
    return report
