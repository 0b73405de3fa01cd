"""
Static analysis of wave-Klein-Gordon coefficient data.

Null decisions use an exact linear-algebra criterion on the restriction
of the form to null directions xi = (1, omega), |omega| = 1; random
null directions are sampled only as a cross-check.
"""

import logging
from itertools import permutations, product
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from models.geometry import FoliationPoint
from models.system import (ConditionOutcome, CubicForm, FrameBoundCertificate, NullCertificate,
                           PointwiseNullEstimate, QuadraticForm, StructureReport, SystemSpec)
from services.geometry import MINKOWSKI, frame_matrices
from utils.errors import DomainError, StructureError

logger = logging.getLogger(__name__)

ZERO_TOLERANCE = 1e-12
SAMPLING_THRESHOLD = 1e-10
DEFAULT_SAMPLES = 1_000_000
SAMPLE_CHUNK = 100_000
MAX_OFFENDERS = 16
NEAR_CONE_RATIO = 0.1


def _directions(rng: np.random.Generator, count: int) -> np.ndarray:
    omega = rng.normal(size=(count, 3))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    return np.hstack([np.ones((count, 1)), omega])


def null_directions(count: int, seed: int = 0) -> np.ndarray:
    """Rows (1, omega) with omega uniform on the unit sphere"""
    return _directions(np.random.default_rng(seed), count)


def sampled_null_max(coefficients: np.ndarray, samples: int, seed: int = 0) -> float:
    """max |T(xi, ..., xi)| over `samples` null directions, drawn and evaluated in chunks"""
    rng = np.random.default_rng(seed)
    flat = coefficients.reshape(4, -1)
    peak = 0.0
    for start in range(0, samples, SAMPLE_CHUNK):
        xi = _directions(rng, min(SAMPLE_CHUNK, samples - start))
        values = xi @ flat
        for _ in range(coefficients.ndim - 1):
            values = np.einsum("na,nab->nb", xi, values.reshape(len(xi), 4, -1))
        peak = max(peak, float(np.max(np.abs(values))))
    return peak


def _tolerance(coefficients: np.ndarray) -> float:
    return ZERO_TOLERANCE * max(1.0, float(np.max(np.abs(coefficients))))


def _symmetrize(tensor: np.ndarray) -> np.ndarray:
    axes = list(permutations(range(tensor.ndim)))
    return sum(np.transpose(tensor, p) for p in axes) / len(axes)


def is_null_quadratic(T: Union[QuadraticForm, np.ndarray], samples: int = DEFAULT_SAMPLES,
                      seed: int = 0, label: str = "") -> Tuple[bool, NullCertificate]:
    """
    T vanishes on null vectors iff T^{0a} + T^{a0} = 0 and
    sym(T^{ab}) = -T^{00} delta^{ab}.
    """
    coefficients = T.coefficients if isinstance(T, QuadraticForm) else np.asarray(T, dtype=float)
    tol = _tolerance(coefficients)
    sym = 0.5 * (coefficients + coefficients.T)
    violations = []
    for a in range(1, 4):
        residual = coefficients[0, a] + coefficients[a, 0]
        if abs(residual) > tol:
            violations.append(f"T^0{a} + T^{a}0 = {residual:.6g} != 0")
    spatial = sym[1:, 1:] + coefficients[0, 0] * np.eye(3)
    for a in range(3):
        for b in range(a, 3):
            if abs(spatial[a, b]) > tol:
                violations.append(f"sym(T^{a + 1}{b + 1}) + T^00 delta = {spatial[a, b]:.6g} != 0")
    decision = not violations
    certificate = _cross_check("quadratic", decision, violations, label,
                               sampled_null_max(coefficients, samples, seed),
                               coefficients, samples)
    return decision, certificate


def is_null_cubic(A: Union[CubicForm, np.ndarray], samples: int = DEFAULT_SAMPLES,
                  seed: int = 0, label: str = "") -> Tuple[bool, NullCertificate]:
    """
    With S the symmetrization of A, the restriction to (1, omega) splits
    into an even part S000 + 3 S0ab w_a w_b and an odd part
    3 S00a w_a + Sabc w_a w_b w_c. Reducing with |omega|^2 = 1, both vanish
    identically iff
        S0ab = -(S000 / 3) delta_ab
        Sabc + S00a delta_bc + S00b delta_ac + S00c delta_ab = 0
    """
    coefficients = A.coefficients if isinstance(A, CubicForm) else np.asarray(A, dtype=float)
    tol = _tolerance(coefficients)
    S = _symmetrize(coefficients)
    violations = []
    even = S[0, 1:, 1:] + (S[0, 0, 0] / 3.0) * np.eye(3)
    for a in range(3):
        for b in range(a, 3):
            if abs(even[a, b]) > tol:
                violations.append(f"S^0{a + 1}{b + 1} + S^000/3 delta = {even[a, b]:.6g} != 0")
    vector = S[0, 0, 1:]
    eye = np.eye(3)
    odd = (S[1:, 1:, 1:]
           + np.einsum("a,bc->abc", vector, eye)
           + np.einsum("b,ac->abc", vector, eye)
           + np.einsum("c,ab->abc", vector, eye))
    for a in range(3):
        for b in range(a, 3):
            for c in range(b, 3):
                if abs(odd[a, b, c]) > tol:
                    violations.append(f"odd part coefficient ({a + 1}{b + 1}{c + 1}) = {odd[a, b, c]:.6g} != 0")
    decision = not violations
    certificate = _cross_check("cubic", decision, violations, label,
                               sampled_null_max(coefficients, samples, seed),
                               coefficients, samples)
    return decision, certificate


def _cross_check(kind: str, decision: bool, violations: List[str], label: str,
                 sampled_max: float, coefficients: np.ndarray, samples: int) -> NullCertificate:
    threshold = SAMPLING_THRESHOLD * max(1.0, float(np.max(np.abs(coefficients))))
    sampled_null = sampled_max < threshold
    agrees = sampled_null == decision
    if not agrees:
        logger.warning(f"{kind} null decision {decision} disagrees with sampling (max {sampled_max:.3g})")
    return NullCertificate(label=label, form_kind=kind, is_null=decision, violations=violations,
                           sampled_max=sampled_max, samples=samples, sampling_agrees=agrees)


def _frame_00(coefficients: np.ndarray, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Tbar^{0..0} is T contracted with (1, -x/t) in every slot
    xi = np.hstack([np.ones((len(t), 1)), -x / t[:, None]])
    if coefficients.ndim == 2:
        return np.einsum("ab,na,nb->n", coefficients, xi, xi)
    return np.einsum("abc,na,nb,nc->n", coefficients, xi, xi, xi)


def frame_bound_certificate(T: Union[QuadraticForm, CubicForm, np.ndarray],
                            sample: Union[Sequence[FoliationPoint], np.ndarray]) -> FrameBoundCertificate:
    """
    sup over the sample of |Tbar^00| (t/s)^2 (|Abar^000| (t/s)^2 for cubic forms).

    Args:
        T: quadratic or cubic form
        sample: FoliationPoints, or an array with rows (t, x1, x2, x3)
    """
    coefficients = T.coefficients if isinstance(T, (QuadraticForm, CubicForm)) else np.asarray(T, dtype=float)
    points = _sample_array(sample)
    if len(points) == 0:
        raise DomainError("frame bound needs a non-empty sample")
    t, x = points[:, 0], points[:, 1:]
    s_sq = t ** 2 - np.sum(x ** 2, axis=1)
    if np.any(s_sq <= 0):
        raise DomainError("frame bound sample must lie strictly inside the light cone")
    functional = np.abs(_frame_00(coefficients, t, x)) * t ** 2 / s_sq
    if coefficients.ndim == 2:
        is_null, _ = is_null_quadratic(coefficients, samples=0)
    else:
        is_null, _ = is_null_cubic(coefficients, samples=0)
    near_cone = int(np.sum(np.sqrt(s_sq) / t < NEAR_CONE_RATIO))
    return FrameBoundCertificate(constant=float(np.max(functional)), is_null=is_null,
                                 unbounded_candidate=not is_null, near_cone_samples=near_cone,
                                 sample_size=len(points))


def _sample_array(sample) -> np.ndarray:
    if isinstance(sample, np.ndarray):
        return np.atleast_2d(sample.astype(float))
    return np.array([[p.t, *p.x] for p in sample], dtype=float).reshape(-1, 4)


def cone_sample(count: int, seed: int = 0, t_range: Tuple[float, float] = (1.5, 50.0),
                min_ratio: float = 0.0) -> np.ndarray:
    """
    Random points of the cone K as rows (t, x1, x2, x3), with s/t >= min_ratio.
    """
    rng = np.random.default_rng(seed)
    rows: List[np.ndarray] = []
    while sum(len(r) for r in rows) < count:
        t = rng.uniform(t_range[0], t_range[1], size=2 * count)
        ratio = rng.uniform(min_ratio, 1.0, size=2 * count)
        r = t * np.sqrt(1.0 - ratio ** 2)
        keep = r < t - 1.0
        omega = rng.normal(size=(2 * count, 3))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
        rows.append(np.hstack([t[keep, None], r[keep, None] * omega[keep]]))
    return np.vstack(rows)[:count]


def pointwise_null_estimate(T: Union[QuadraticForm, np.ndarray], du: Sequence[float],
                            dv: Sequence[float], p: FoliationPoint) -> PointwiseNullEstimate:
    """
    Split T(du, dv) = Tbar^00 dbar_0 u dbar_0 v + (mixed frame terms)
    from natural-frame gradients du, dv at p.
    """
    if not p.in_cone:
        raise DomainError(f"point t={p.t}, r={p.r} is outside the cone")
    coefficients = T.coefficients if isinstance(T, QuadraticForm) else np.asarray(T, dtype=float)
    frames = frame_matrices(p)
    tbar = frames.psi.T @ coefficients @ frames.psi
    du = np.asarray(du, dtype=float)
    dv = np.asarray(dv, dtype=float)
    du_bar = frames.phi @ du
    dv_bar = frames.phi @ dv
    total = float(du_bar @ tbar @ dv_bar)
    first = float(tbar[0, 0] * du_bar[0] * dv_bar[0])
    return PointwiseNullEstimate(first_term=abs(first), mixed_terms=total - first, total=total,
                                 direct=float(du @ coefficients @ dv))


# Structure checks --------------------------------------------------------------

def validate_dimensions(spec: SystemSpec) -> Dict[str, np.ndarray]:
    """Dense coefficient arrays, or StructureError when shapes and ranges disagree"""
    if spec.j0 > spec.n0:
        raise StructureError(f"j0={spec.j0} exceeds n0={spec.n0}")
    if len(spec.masses) != spec.n0:
        raise StructureError(f"{len(spec.masses)} masses given for n0={spec.n0} components")
    if spec.components is not None and len(spec.components) != spec.n0:
        raise StructureError(f"{len(spec.components)} component names given for n0={spec.n0}")
    try:
        return {name: spec.dense(name) for name in "ABPQR"}
    except IndexError as exc:
        raise StructureError(str(exc)) from exc


def _offenders(array: np.ndarray, where: Iterable[Tuple[int, ...]], tol: float,
               layout_offset: Sequence[int]) -> List[Tuple[int, ...]]:
    found = []
    for index in where:
        if abs(array[index]) > tol:
            found.append(tuple(i + o for i, o in zip(index, layout_offset)))
            if len(found) >= MAX_OFFENDERS:
                break
    return found


def check_structure(spec: SystemSpec, samples: int = 2000, seed: int = 0) -> StructureReport:
    """
    Symmetry, mass split, null conditions for pure-wave interactions and the
    non-blow-up restrictions. Index tuples in the report are 1-based for
    components and 0-based for spacetime slots.
    """
    arrays = validate_dimensions(spec)
    A, B, P, Q, R = (arrays[k] for k in "ABPQR")
    n0, j0 = spec.n0, spec.j0
    tol = ZERO_TOLERANCE * max(1.0, max(float(np.max(np.abs(a))) if a.size else 0.0 for a in arrays.values()))
    wave = range(j0)
    kg = range(j0, n0)
    comps = range(n0)
    st = range(4)
    conditions: List[ConditionOutcome] = []
    certificates: List[NullCertificate] = []

    # symmetry in (i, j) and (alpha, beta)
    asym = []
    for name, array in (("A", A), ("B", B)):
        swapped_ij = np.swapaxes(array, 0, 1)
        swapped_ab = np.swapaxes(array, 2, 3)
        bad = np.argwhere((np.abs(array - swapped_ij) > tol) | (np.abs(array - swapped_ab) > tol))
        for index in bad[:MAX_OFFENDERS - len(asym)]:
            asym.append((name,) + tuple(int(i) + (1 if k in (0, 1) or k == array.ndim - 1 else 0)
                                          for k, i in enumerate(index)))
    conditions.append(ConditionOutcome(name="symmetry", passed=not asym,
                                       offending=[tuple(x for x in o[1:]) for o in asym],
                                       detail=", ".join(sorted({o[0] for o in asym}))))

    masses = spec.masses
    bad_mass = [(i + 1,) for i in wave if abs(masses[i]) > tol]
    bad_mass += [(i + 1,) for i in kg if masses[i] < spec.sigma]
    conditions.append(ConditionOutcome(name="mass split", passed=not bad_mass, offending=bad_mass[:MAX_OFFENDERS],
                                       detail=f"sigma={spec.sigma}"))

    # null condition for pure-wave indices
    null_bad: List[Tuple[int, ...]] = []
    null_quadratics: Dict[str, np.ndarray] = {}
    for i, j, k in product(wave, wave, wave):
        for label, tensor, kind in (
            (f"A_{i + 1}^{j + 1}..{k + 1}", A[i, j, :, :, :, k], "cubic"),
            (f"B_{i + 1}^{j + 1}..{k + 1}", B[i, j, :, :, k], "quadratic"),
            (f"P_{i + 1}^..{j + 1},{k + 1}", P[i, :, :, j, k], "quadratic"),
        ):
            if not np.any(np.abs(tensor) > tol):
                continue
            if kind == "cubic":
                ok, certificate = is_null_cubic(tensor, samples=samples, seed=seed, label=label)
            else:
                ok, certificate = is_null_quadratic(tensor, samples=samples, seed=seed, label=label)
                if ok:
                    null_quadratics[label] = tensor
            certificates.append(certificate)
            if not ok and len(null_bad) < MAX_OFFENDERS:
                null_bad.append((i + 1, j + 1, k + 1))
    conditions.append(ConditionOutcome(name="null condition for wave components", passed=not null_bad,
                                       offending=null_bad))

    # B_i^{j ab k} = 0 for j Klein-Gordon, k wave; R_i^{jk} = 0 if j or k is wave
    blowup = _offenders(B, ((i, j, a, b, k) for i in comps for j in kg for a in st for b in st for k in wave),
                        tol, (1, 1, 0, 0, 1))
    blowup += _offenders(R, ((i, j, k) for i in comps for j in comps for k in comps if j < j0 or k < j0),
                         tol, (1, 1, 1))
    conditions.append(ConditionOutcome(name="non-blow-up condition", passed=not blowup,
                                       offending=blowup[:MAX_OFFENDERS]))

    q_bad = _offenders(Q, ((i, a, j, k) for i in comps for a in st for j in comps for k in wave),
                       tol, (1, 0, 1, 1))
    conditions.append(ConditionOutcome(name="undifferentiated wave factor in Q", passed=not q_bad,
                                       offending=q_bad))

    derived = _offenders(B, ((j, i, a, b, k) for j in kg for i in wave for a in st for b in st for k in wave),
                         tol, (1, 1, 0, 0, 1))
    conditions.append(ConditionOutcome(name="derived restriction on B", passed=not derived,
                                       offending=derived))

    bounds: Dict[str, float] = {}
    sample = cone_sample(256, seed=seed)
    for label, tensor in null_quadratics.items():
        bounds[label] = frame_bound_certificate(tensor, sample).constant

    report = StructureReport(spec_name=spec.name, passed=all(c.passed for c in conditions),
                             conditions=conditions, null_certificates=certificates, frame_bounds=bounds)
    logger.info(f"structure analysis of '{spec.name}': "
                f"{'pass' if report.passed else 'fail: ' + ', '.join(report.failed_conditions())}")
    return report


def minkowski_form() -> QuadraticForm:
    return QuadraticForm(coefficients=MINKOWSKI)
