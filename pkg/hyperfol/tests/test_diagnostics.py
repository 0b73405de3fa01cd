"""
Tests for the slice functionals and the run verdicts
"""
import numpy as np
import pytest

from models.grid import Grid, GridSlice
from models.run import EnergyReport, FluxSample
from services.diagnostics import (decay_monitor, decay_verdicts, energy_band_verdict, energy_density_forms,
                                  energy_curved, energy_hyperboloidal, energy_identity_residual, flat_energy,
                                  lp_norm_on_slice, mass_sandwich_check, total_energy, weighted_monitors,
                                  zi_energies)
from utils.errors import CadenceError, DomainError
from tests.test_utils import (SAMPLE_BLOWUP_SPEC, SAMPLE_KG_SPEC, SAMPLE_NULL_WAVE_SPEC, SAMPLE_QUASILINEAR_SPEC,
                              gaussian, slice_from_expression, spec_from, standing_wave)


@pytest.fixture
def wave_slice(small_grid):
    return slice_from_expression(standing_wave(), 2.0, small_grid)


def test_energy_density_forms_agree_pointwise(wave_slice):
    natural, frame, boost = energy_density_forms(wave_slice, 0, 0.5)
    np.testing.assert_allclose(natural, frame, rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(boost, frame, rtol=1e-9, atol=1e-14)


def test_energy_hyperboloidal_by_name_and_index(wave_slice):
    assert energy_hyperboloidal(wave_slice, "u", 0.0) == energy_hyperboloidal(wave_slice, 0, 0.0)
    assert energy_hyperboloidal(wave_slice, 0, 1.0) > energy_hyperboloidal(wave_slice, 0, 0.0) > 0


def test_energy_unknown_component(wave_slice):
    with pytest.raises(DomainError):
        energy_hyperboloidal(wave_slice, "v", 0.0)
    with pytest.raises(DomainError):
        energy_hyperboloidal(wave_slice, 3, 0.0)


def test_total_energy_of_zero_slice(small_grid):
    slice_ = GridSlice.zeros(2.0, small_grid, ["u"])
    assert total_energy(slice_, spec_from(SAMPLE_NULL_WAVE_SPEC)) == 0.0


def test_lp_norms(small_grid):
    ones = np.ones(small_grid.shape)
    assert lp_norm_on_slice(ones, 2.0, np.inf) == 1.0
    expected = np.sqrt(ones.size * small_grid.cell_volume)
    assert lp_norm_on_slice(ones, 2.0, 2, small_grid) == pytest.approx(expected)
    assert lp_norm_on_slice("0", 2.0, 1, small_grid) == 0.0


def test_lp_norm_rejects_bad_input(small_grid):
    with pytest.raises(DomainError):
        lp_norm_on_slice(np.ones(small_grid.shape), 2.0, 3, small_grid)
    with pytest.raises(DomainError):
        lp_norm_on_slice("x1", 2.0, 2)
    with pytest.raises(DomainError):
        lp_norm_on_slice(np.ones(small_grid.shape), 2.0, 2)


def test_weighted_monitor_keys(small_grid):
    slice_ = GridSlice.zeros(2.0, small_grid, ["u", "v"])
    monitors = weighted_monitors(slice_, spec_from(SAMPLE_BLOWUP_SPEC))
    assert set(monitors) == {"u.sup_t12_s_du", "u.sup_t32_dbar_u", "u.sup_t32_over_s_u", "v.sup_sigma_t32_v"}
    assert all(value == 0.0 for value in monitors.values())


def test_decay_monitor_needs_five_samples():
    with pytest.raises(DomainError):
        decay_monitor([(2.0, 1.0), (3.0, 1.0), (4.0, 1.0)])


def test_decay_monitor_constant_series():
    fit = decay_monitor([(s, 0.3) for s in (2.0, 3.0, 4.0, 5.0, 6.0)], name="flat")
    assert fit.slope == 0.0
    assert fit.ratio == 1.0
    assert fit.bounded
    assert fit.name == "flat"


def test_decay_monitor_power_law():
    series = [(s, s ** -1.5) for s in np.linspace(2.0, 6.0, 9)]
    fit = decay_monitor(series, factor=2.0)
    assert fit.slope == pytest.approx(-1.5)
    assert fit.ratio == pytest.approx(3.0 ** 1.5)
    assert not fit.bounded


def test_mass_sandwich():
    assert mass_sandwich_check(1.0, 2.0, 2.0, 1.0)
    assert not mass_sandwich_check(1.0, 5.0, 2.0, 1.0)
    assert not mass_sandwich_check(2.0, 1.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        mass_sandwich_check(1.0, 1.0, 0.5, 1.0)


def test_mass_sandwich_on_a_slice(wave_slice):
    e_sigma = energy_hyperboloidal(wave_slice, 0, 1.0)
    e_c = energy_hyperboloidal(wave_slice, 0, 1.5)
    assert mass_sandwich_check(e_sigma, e_c, 1.5, 1.0)


def test_energy_identity_needs_three_records():
    trace = [FluxSample(s=2.0, energy=1.0, flux=0.0), FluxSample(s=2.1, energy=1.0, flux=0.0)]
    with pytest.raises(CadenceError):
        energy_identity_residual(trace)


def test_energy_identity_exact_for_linear_flux():
    trace = [FluxSample(s=s, energy=2.0 * s * s, flux=2.0 * s) for s in np.linspace(2.0, 3.0, 11)]
    result = energy_identity_residual(trace)
    assert result.lhs == pytest.approx(5.0)
    assert result.rhs == pytest.approx(5.0)
    assert result.residual < 1e-12
    assert result.cadence_ok
    assert result.records == 11


def test_energy_identity_zero_energy():
    trace = [FluxSample(s=s, energy=0.0, flux=0.0) for s in (2.0, 2.1, 2.2)]
    result = energy_identity_residual(trace)
    assert result.residual == 0.0
    assert result.cadence_ok


def test_flat_energy_range_checks(small_grid):
    snapshots = [slice_from_expression("x1", s, small_grid) for s in (2.0, 2.1, 2.2)]
    spec = spec_from(SAMPLE_NULL_WAVE_SPEC)
    with pytest.raises(DomainError):
        flat_energy(snapshots[:1], 2.0, spec)
    with pytest.raises(DomainError):
        flat_energy(snapshots, 2.0, spec)


def test_flat_energy_of_static_linear_field(small_grid):
    snapshots = [slice_from_expression("x1", s, small_grid) for s in np.linspace(2.0, 4.5, 6)]
    value = flat_energy(snapshots, 3.0, spec_from(SAMPLE_NULL_WAVE_SPEC))
    expected = np.count_nonzero(small_grid.r < 2.0) * small_grid.cell_volume
    assert value == pytest.approx(expected, rel=1e-9)


def test_zi_energy_keys(small_grid):
    slice_ = slice_from_expression(gaussian(0.6), 2.0, small_grid, name="v")
    energies = zi_energies(slice_, spec_from(SAMPLE_KG_SPEC), 1)
    assert len(energies) == 8
    assert {"v[id]", "v[d0]", "v[L1]"} <= set(energies)
    assert energies["v[id]"] == pytest.approx(energy_hyperboloidal(slice_, 0, 1.0), rel=1e-9)
    assert all(value >= 0.0 for value in energies.values())


def _report(s, energy, zi=None, monitors=None):
    return EnergyReport(s=s, energies={"u": energy}, zi_energies=zi or {}, monitors=monitors or {})


def test_energy_band_within():
    reports = [_report(s, 1.0 + 0.1 * k) for k, s in enumerate((2.0, 2.5, 3.0))]
    verdict = energy_band_verdict(reports)
    assert verdict["within"]
    assert not verdict["growth"]
    assert verdict["max_ratio"] == pytest.approx(np.sqrt(1.2))


def test_energy_band_growth():
    reports = [_report(s, 4.0 ** k) for k, s in enumerate((2.0, 2.5, 3.0))]
    verdict = energy_band_verdict(reports)
    assert not verdict["within"]
    assert verdict["growth"]
    assert verdict["max_ratio"] == pytest.approx(4.0)
    assert verdict["worst_key"] == "u"


def test_energy_band_prefers_zi_energies():
    reports = [_report(2.0, 1.0, zi={"u[id]": 1.0, "u[L1]": 1.0}),
               _report(3.0, 1.0, zi={"u[id]": 1.0, "u[L1]": 9.0})]
    verdict = energy_band_verdict(reports)
    assert verdict["max_ratio"] == pytest.approx(3.0)
    assert verdict["worst_key"] == "u[L1]"


def test_energy_band_edge_cases():
    with pytest.raises(DomainError):
        energy_band_verdict([])
    assert energy_band_verdict([_report(2.0, 0.0)])["within"]


def test_decay_verdicts_window():
    s_values = np.linspace(2.0, 7.0, 11)
    reports = [_report(s, 1.0, monitors={"u.sup": 0.5, "short": 1.0} if k < 3 else {"u.sup": 0.5})
               for k, s in enumerate(s_values)]
    fits = decay_verdicts(reports)
    assert set(fits) == {"u.sup"}
    assert fits["u.sup"].samples == int(np.count_nonzero(s_values >= 3.0))
    assert fits["u.sup"].bounded
    assert decay_verdicts([]) == {}




RADII = np.linspace(0.0, 8.0, 40001)


def _radial_integral(values: np.ndarray) -> float:
    """int over R^3 of a radial function sampled on RADII"""
    return 4.0 * np.pi * float(np.trapz(values * RADII ** 2, RADII))


@pytest.fixture(scope="module")
def gaussian_slice():
    return slice_from_expression(gaussian(), 3.0, Grid.from_spacing(0.1, 3.5))


def test_energy_matches_radial_quadrature(gaussian_slice):
    r = RADII
    expected = _radial_integral((2.0 * r * np.exp(-r ** 2)) ** 2 + np.exp(-2.0 * r ** 2))
    assert energy_hyperboloidal(gaussian_slice, 0, 1.0) == pytest.approx(expected, rel=1e-3)


def test_lp_norms_match_radial_quadrature(gaussian_slice):
    w, grid = gaussian_slice.w[0], gaussian_slice.grid
    l2 = np.sqrt(_radial_integral(np.exp(-2.0 * RADII ** 2)))
    assert lp_norm_on_slice(w, 3.0, 2, grid) == pytest.approx(l2, rel=1e-3)
    assert lp_norm_on_slice(w, 3.0, 1, grid) == pytest.approx(_radial_integral(np.exp(-RADII ** 2)), rel=1e-3)
    assert lp_norm_on_slice(w, 3.0, np.inf, grid) == pytest.approx(1.0)


def test_curved_energy_without_quasilinear_coefficients(wave_slice):
    spec = spec_from(dict(SAMPLE_QUASILINEAR_SPEC, B=[[[1, 1, 0, 0, 1], 0.0]]))
    curved, coercive = energy_curved(wave_slice, spec)
    assert curved == total_energy(wave_slice, spec)
    assert coercive


def test_curved_energy_of_zero_field(small_grid):
    slice_ = GridSlice.zeros(2.0, small_grid, ["u"])
    assert energy_curved(slice_, spec_from(SAMPLE_QUASILINEAR_SPEC)) == (0.0, True)


def test_curved_energy_correction_is_linear_in_amplitude(small_grid):
    spec = spec_from(SAMPLE_QUASILINEAR_SPEC)
    deviations = []
    for amplitude in (1e-1, 1e-2, 1e-3):
        slice_ = slice_from_expression(amplitude * standing_wave(), 2.0, small_grid)
        curved, coercive = energy_curved(slice_, spec)
        assert coercive
        deviations.append(curved / total_energy(slice_, spec) - 1.0)
    assert deviations[0] != 0.0
    assert deviations[0] / deviations[1] == pytest.approx(10.0, rel=1e-6)
    assert deviations[1] / deviations[2] == pytest.approx(10.0, rel=1e-6)
