"""
Tests for the verification suites and their building blocks
"""
import numpy as np
import pytest
from pydantic import ValidationError

from models.grid import Grid
from models.verification import TestFunctionFamily
from services.fields import MultiIndex
from services.monitoring import RunMetrics
from services.profiles import profile_expression, sample
from services.verify import (ConvergenceStudy, _refinement_check, box_error, commutators_suite, convergence_slopes,
                             evolution_box_identity, frames_suite, hardy_flat_ratio, hardy_hyperboloidal_check,
                             homogeneity_check, null_suite, operators_suite, origin_cell_weight, run_suite,
                             sobolev_ratio, synthetic_slices, xi_constants)
from utils.errors import DomainError, StencilMarginError, UsageError
from tests.test_utils import SAMPLE_BUMP


def test_convergence_slopes():
    assert convergence_slopes([1.0, 1.0 / 16, 1.0 / 256]) == pytest.approx([4.0, 4.0])
    assert convergence_slopes([1.0, 0.0]) == [float("inf")]
    assert convergence_slopes([0.0, 0.0]) == [0.0]


def test_convergence_study_fits_the_order():
    result = ConvergenceStudy("quartic", lambda h: 3.0 * h ** 4, 0.4).run()
    assert result.spacings == pytest.approx([0.4, 0.2, 0.1])
    assert result.slopes == pytest.approx([4.0, 4.0])
    assert result.fitted_slope == pytest.approx(4.0)


def test_convergence_study_needs_two_levels():
    with pytest.raises(UsageError):
        ConvergenceStudy("single", lambda h: h, 0.1, levels=1)


def test_evolution_box_identity():
    assert evolution_box_identity() < 1e-9
    assert evolution_box_identity("sin(t - x1)*exp(-(x2**2 + x3**2)/2)", samples=16, seed=3) < 1e-9


def test_box_error_rejects_unknown_decomposition():
    with pytest.raises(UsageError):
        box_error("cos(t)", 0.25, "boost")


def test_frames_suite_passes():
    results = frames_suite(samples=500, seed=1)
    assert [r.name for r in results] == ["frame matrices inverse", "semi-frame metric inverse",
                                        "evolution-chart transition"]
    assert all(r.passed for r in results)


def test_null_suite_small_sample():
    results = null_suite(quadratic=6, cubic=4, samples=5000, seed=2)
    assert all(r.passed for r in results)
    assert results[0].measured["disagreements"] == 0.0
    assert results[0].measured["disagreements[perturbed-null]"] == 0.0
    assert results[0].measured["directions"] == 5000.0


@pytest.mark.parametrize("coefficient,translations,fields,degree", [
    ("x1/t", "id", "id", 0),
    ("s/t", "d0", "id", -1),
    ("t/(t+r)", "d1,d2", "L3", -2),
    ("Psi_2^0", "id", "L1,L2", 0),
])
def test_homogeneity_constants_are_scale_invariant(coefficient, translations, fields, degree):
    result = homogeneity_check(coefficient, MultiIndex.parse(translations), MultiIndex.parse(fields), seed=4)
    assert result.degree == degree
    assert result.invariant
    assert np.isfinite(result.constant)


def test_homogeneity_check_rejects_bad_requests():
    with pytest.raises(DomainError):
        homogeneity_check("t*x1")
    with pytest.raises(DomainError):
        homogeneity_check("x1/t", translations=MultiIndex.parse("L1"))
    with pytest.raises(DomainError):
        homogeneity_check("x1/t", MultiIndex.parse("d0,d1"), MultiIndex.parse("L1,L2"))


def test_xi_constants():
    constants = xi_constants(1, seed=5)
    assert len(constants) == 8
    assert constants["id"] == pytest.approx(1.0)
    assert all(np.isfinite(v) for v in constants.values())


def test_test_function_family_is_deterministic_and_supported():
    family = TestFunctionFamily(members=4, seed=7)
    first, second = family.profiles(), family.profiles()
    assert first == second
    for profile in first:
        reach = np.linalg.norm(profile.center) + profile.radius
        assert reach <= family.support_radius - family.margin + 1e-12


def test_test_function_family_validation():
    with pytest.raises(ValidationError):
        TestFunctionFamily(generator="sinc")
    with pytest.raises(ValidationError):
        TestFunctionFamily(width_range=(1.0, 0.5))


def test_slice_inequality_ratios():
    s = 3.0
    grid = Grid.from_spacing(0.25, 5.5)
    t = np.sqrt(s * s + grid.r ** 2)
    u = sample(profile_expression(TestFunctionFamily(members=1).profiles()[0]), t, grid)
    assert 0.0 < sobolev_ratio(u, s, grid) < np.inf
    assert 0.0 < hardy_flat_ratio(u, s, grid) < np.inf
    assert sobolev_ratio(np.zeros(grid.shape), s, grid) == 0.0


def test_slice_inequalities_need_stencil_room():
    grid = Grid(9, 1.0)
    with pytest.raises(StencilMarginError):
        sobolev_ratio(np.zeros(grid.shape), 2.0, grid)


def test_hardy_flat_ratio_matches_radial_quadrature():
    grid = Grid.from_spacing(0.1, 3.5)
    u = grid.r ** 2 * np.exp(-grid.r ** 2)
    r = np.linspace(0.0, 8.0, 40001)
    lhs = np.sqrt(4.0 * np.pi * np.trapz(r ** 4 * np.exp(-2.0 * r ** 2), r))
    gradient = (4.0 * np.pi / 3.0) * np.trapz(r ** 4 * (2.0 - 2.0 * r ** 2) ** 2 * np.exp(-2.0 * r ** 2), r)
    expected = lhs / (3.0 * np.sqrt(gradient))
    assert hardy_flat_ratio(u, 3.0, grid) == pytest.approx(expected, rel=5e-3)


def test_refinement_check_needs_the_family_envelope():
    steady = _refinement_check("steady", [1.0, 1.1, 1.2], [1.0, 1.1, 1.2])
    assert steady.passed
    assert steady.measured["within_envelope"] == 1.0
    outlier = _refinement_check("outlier", [1.0, 1.0, 1.0, 10.0], [1.0, 1.0, 1.0, 10.0])
    assert outlier.refinement_delta == 0.0
    assert not outlier.passed
    assert outlier.measured["within_envelope"] == 0.0


def test_origin_cell_weight_scales_like_inverse_square():
    assert origin_cell_weight(0.1) == pytest.approx(4.0 * origin_cell_weight(0.2))
    # the cell mean of r^-2 exceeds its value at the cell corner
    assert origin_cell_weight(0.2) > 1.0 / (3 * 0.1 ** 2)


def test_hyperboloidal_hardy_check():
    grid = Grid.from_spacing(0.25, 3.0)
    slices = synthetic_slices(SAMPLE_BUMP, np.linspace(3.0, 4.0, 5), grid)
    check = hardy_hyperboloidal_check(slices)
    assert check.lhs > 0
    assert 0.0 < check.ratio < np.inf
    with pytest.raises(DomainError):
        hardy_hyperboloidal_check(slices[:1])


def test_run_suite_unknown_selection():
    with pytest.raises(UsageError):
        run_suite("everything")


def test_run_suite_frames_records_timing():
    report = run_suite("frames", seed=1)
    assert report.passed
    assert report.selection == "frames"
    assert "verify:frames" in RunMetrics.summary()


@pytest.mark.slow
def test_operators_suite_converges():
    results = operators_suite(h0=0.2)
    assert results[0].name == "evolution-chart box identity"
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]


@pytest.mark.slow
def test_commutators_suite_converges():
    results = commutators_suite(h0=0.2, symbolic=False)
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]
