import numpy as np
import pytest

import services.solver as solver
from models.grid import Grid
from models.run import SolverConfig
from services.diagnostics import energy_band_verdict, energy_identity_residual
from services.jets import extend_jet, principal_solve
from services.presets import get_preset, with_manufactured_solution
from services.solver import (HyperboloidalSystem, box_in_frame, cfl_step, evolve, frame_box_field, initial_slice,
                             rhs, rk4_step, semi_frame_box_field, semi_hyperboloidal_box, step)
from services.fields import jet_from_expression
from services.profiles import manufactured_forcing, parse_expression, sample, wave_operator
from utils.errors import (DomainError, InstabilityDetected, MissingCoFieldError, QuasilinearBreakdown,
                          StencilMarginError)
from tests.test_utils import (SAMPLE_BREAKDOWN_SPEC, SAMPLE_QUASILINEAR_SPEC, SMOOTH_BUMP, slice_from_expression,
                              spec_from)

SMOOTH = "cos(t)*exp(-((x1 - 0.3)**2 + x2**2 + (x3 + 0.2)**2))"


def _box_errors(field, h):
    grid = Grid.from_spacing(h, 1.5)
    jet = jet_from_expression(SMOOTH, grid, 3, s=3.0)
    exact = sample(wave_operator(parse_expression(SMOOTH)), jet.t, grid)
    mask = jet.partial(1).partial(1).interior()
    return float(np.max(np.abs(field(jet) - exact)[mask]))


@pytest.mark.parametrize("field", [frame_box_field, semi_frame_box_field])
def test_wave_operator_decompositions_converge(field):
    coarse, fine = _box_errors(field, 0.2), _box_errors(field, 0.1)
    assert fine < 5e-3
    assert coarse / fine > 8.0


def test_frame_box_needs_a_hyperboloid_and_three_levels():
    grid = Grid(9, 1.0)
    with pytest.raises(DomainError):
        frame_box_field(jet_from_expression(SMOOTH, grid, 3, t0=3.0))
    with pytest.raises(MissingCoFieldError):
        frame_box_field(jet_from_expression(SMOOTH, grid, 2, s=3.0))


def test_box_operators_at_a_point_match_the_direct_chart():
    grid = Grid.from_spacing(0.1, 1.5)
    jet = jet_from_expression(SMOOTH, grid, 3, s=3.0)
    exact = sample(wave_operator(parse_expression(SMOOTH)), jet.t, grid)
    centre = grid.nearest_index((0.0, 0.0, 0.0))
    assert box_in_frame(jet, centre) == pytest.approx(float(frame_box_field(jet)[centre]))
    assert box_in_frame(jet, centre) == pytest.approx(float(exact[centre]), abs=5e-3)
    assert semi_hyperboloidal_box(jet, centre) == pytest.approx(float(exact[centre]), abs=5e-3)


def test_box_operators_need_stencil_room():
    grid = Grid(9, 1.0)
    jet = jet_from_expression(SMOOTH, grid, 3, s=3.0)
    with pytest.raises(StencilMarginError):
        box_in_frame(jet, (1, 4, 4))
    with pytest.raises(StencilMarginError):
        semi_hyperboloidal_box(jet, (4, 3, 4))
    assert np.isfinite(box_in_frame(jet, (4, 4, 4)))


def test_cfl_step_uses_edge_of_support():
    grid = Grid.from_spacing(0.25, 3.0)
    assert cfl_step(2.0, grid, 0.4) == pytest.approx(0.08)


def test_extend_jet_recovers_second_time_derivative():
    grid = Grid.from_spacing(0.1, 1.0)
    exact = "cos(t)*sin(x1)"
    slice_ = slice_from_expression(exact, 3.0, grid)
    spec = spec_from({"n0": 1, "j0": 1, "masses": [0.0], "components": ["u"]})
    jet = extend_jet(slice_, spec, 3)[0]
    expected = sample(parse_expression("-cos(t)*sin(x1)"), slice_.t, grid)
    mask = jet.partial(1).partial(1).interior()
    assert jet.depth == 3
    np.testing.assert_allclose(jet.levels[2][mask], expected[mask], atol=5e-4)


def test_principal_solve_detects_lost_smallness():
    matrix = np.full((1, 1, 4), 0.8)
    with pytest.raises(QuasilinearBreakdown) as info:
        principal_solve(matrix, np.ones((1, 4)), 2.0)
    assert info.value.status == "quasilinear-breakdown"
    solved = principal_solve(np.full((1, 1, 4), 0.25), np.ones((1, 4)), 2.0)
    np.testing.assert_allclose(solved, 0.8)


def test_rhs_vanishes_outside_the_support(small_grid):
    config = get_preset("free-wave", s0=2.0, s_end=2.5, h=0.25)
    slice_ = initial_slice(config, small_grid)
    dw, dpi = rhs(2.0, slice_, config.spec)
    outside = ~slice_.support_mask
    assert np.all(dw[:, outside] == 0.0)
    assert np.all(dpi[:, outside] == 0.0)
    np.testing.assert_allclose(dw, slice_.ds_w)


def test_initial_slice_follows_the_preset_profile(small_grid):
    config = get_preset("linear-kg", s0=2.0, s_end=2.5, h=0.25)
    slice_ = initial_slice(config, small_grid)
    centre = small_grid.nearest_index((0.0, 0.0, 0.0))
    assert slice_.components == ["v"]
    assert slice_.w[(0,) + centre] == pytest.approx(1.0)
    assert np.all(slice_.w[:, ~slice_.support_mask] == 0.0)


def test_step_guards_against_blowup(small_grid):
    config = get_preset("linear-kg", s0=2.0, s_end=2.5, h=0.25)
    system = HyperboloidalSystem(config.spec, small_grid)
    slice_ = initial_slice(config, small_grid)
    with pytest.raises(InstabilityDetected) as info:
        step(slice_, 0.05, system, reference_max=1e-6, blowup_factor=2.0)
    assert info.value.worst_point is not None
    advanced = step(slice_, 0.05, system, reference_max=1.0)
    assert advanced.s == pytest.approx(2.05)


def test_step_converges_in_ds():
    grid = Grid.from_spacing(0.25, 5.0)
    config = get_preset("linear-kg", s0=3.0, s_end=3.5, h=0.25)
    system = HyperboloidalSystem(config.spec, grid)
    start = initial_slice(config, grid)

    def advance(steps):
        current = start
        for _ in range(steps):
            current = step(current, 0.04 / steps, system)
        return current.w

    coarse, medium, fine = advance(1), advance(2), advance(4)
    first = float(np.max(np.abs(coarse - medium)))
    second = float(np.max(np.abs(medium - fine)))
    assert first / second >= 2 ** 3.5


def test_rhs_support_follows_the_frozen_edge(small_grid):
    system = HyperboloidalSystem(get_preset("free-wave").spec, small_grid)
    w = np.zeros((1,) + small_grid.shape)
    pi = np.ones_like(w)
    grown = system.support_mask(2.2) & ~system.support_mask(2.0)
    assert np.any(grown)
    dw, _ = system.rhs(2.0, w, pi, edge=2.2)
    np.testing.assert_array_equal(dw[0], np.where(system.support_mask(2.2), 1.0, 0.0))
    dw, _ = system.rhs(2.0, w, pi)
    assert np.all(dw[0][grown] == 0.0)


def test_rk4_stages_share_one_support_edge(small_grid, monkeypatch):
    system = HyperboloidalSystem(get_preset("free-wave").spec, small_grid)
    edges = []
    original = system.rhs

    def recording_rhs(s, w, pi, edge=None):
        edges.append(edge)
        return original(s, w, pi, edge)

    monkeypatch.setattr(system, "rhs", recording_rhs)
    w = np.zeros((1,) + small_grid.shape)
    rk4_step(system, 2.0, w, w.copy(), 0.05)
    assert edges == [pytest.approx(2.05)] * 4


def test_evolve_keeps_diagnostics_on_breakdown(short_run, monkeypatch):
    def failing_step(slice_, ds, system, reference_max=None, blowup_factor=1e4):
        raise InstabilityDetected("forced", s=slice_.s + ds, worst_point=(0.0, 0.0, 0.0))

    monkeypatch.setattr(solver, "step", failing_step)
    result = evolve(short_run("free-wave"))
    assert result.status == "instability-detected"
    assert result.worst_point == (0.0, 0.0, 0.0)
    assert len(result.reports) == 1
    assert result.steps == 0


def test_free_wave_energy_is_conserved(short_run):
    result = evolve(short_run("free-wave", s_end=2.5))
    assert result.status == "completed"
    assert result.final_s == pytest.approx(2.5)
    energies = [r.total_energy for r in result.reports]
    assert energies[0] > 0
    assert max(abs(e / energies[0] - 1.0) for e in energies) < 5e-2
    assert [r.s for r in result.reports] == sorted(r.s for r in result.reports)
    assert "rhs" in result.timings and "step" in result.timings


def test_evolve_calls_back_with_each_report(short_run):
    seen = []
    result = evolve(short_run("linear-kg", s_end=2.3, cadence=2), on_report=lambda r, sl: seen.append((r.s, sl.s)))
    assert [s for s, _ in seen] == [r.s for r in result.reports]
    assert all(a == b for a, b in seen)
    assert result.reports[-1].s == pytest.approx(2.3)


def test_keep_snapshots(short_run):
    result = evolve(short_run("free-wave", s_end=2.2, keep_snapshots=True))
    assert len(result.snapshots) == len(result.reports)
    assert result.snapshots[0].s == pytest.approx(2.0)


def test_manufactured_forcing_of_klein_gordon():
    forcing = manufactured_forcing("cos(t)*x1", 1.0)
    # box (cos t x1) = -cos t x1, plus c^2 u
    assert forcing == 0


@pytest.mark.slow
def test_null_wave_short_run_completes(short_run):
    result = evolve(short_run("null-wave", s_end=2.5))
    assert result.status == "completed"
    assert all(r.coercive for r in result.reports)


def _final_mms_errors(configs):
    errors = []
    for config in configs:
        result = evolve(config)
        assert result.status == "completed"
        errors.append(result.reports[-1].mms_error)
    return errors


def test_evolve_reports_quasilinear_breakdown_on_the_initial_slice():
    config = SolverConfig(spec=SAMPLE_BREAKDOWN_SPEC, s0=2.0, s_end=2.5, h=0.25, zi_order=0,
                          initial_data={"components": [{"value": {"kind": "bump", "amplitude": 1.0, "radius": 1.2}}]})
    result = evolve(config)
    assert result.status == "quasilinear-breakdown"
    assert result.final_s == pytest.approx(2.0)
    assert result.steps == 0
    assert result.reports == []
    assert result.worst_point == pytest.approx((0.0, 0.0, 0.0))


def test_evolve_keeps_reports_when_diagnostics_break_down(short_run, monkeypatch):
    original = solver.build_energy_report
    calls = []

    def failing_report(slice_, *args, **kwargs):
        calls.append(slice_.s)
        if len(calls) > 1:
            raise QuasilinearBreakdown("forced", s=slice_.s, worst_point=(0.0, 0.0, 0.0))
        return original(slice_, *args, **kwargs)

    monkeypatch.setattr(solver, "build_energy_report", failing_report)
    result = evolve(short_run("free-wave"))
    assert result.status == "quasilinear-breakdown"
    assert len(result.reports) == 1
    assert result.steps == 1
    assert result.final_s == pytest.approx(calls[-1])
    assert len(result.flux_trace) == 2


def test_initial_slice_rejects_a_lattice_missing_the_support():
    config = get_preset("linear-kg", s_end=3.0, h=0.25)
    with pytest.raises(DomainError) as info:
        initial_slice(config, Grid(10, 45.0))
    assert "support radius" in info.value.message


def test_initial_slice_rejects_data_that_sample_to_zero():
    off_lattice = {"components": [{"value": {"kind": "bump", "amplitude": 1.0, "center": [0.5, 0.0, 0.0],
                                             "radius": 0.3}}]}
    config = get_preset("free-wave", s_end=3.0, h=1.0, initial_data=off_lattice)
    with pytest.raises(DomainError) as info:
        initial_slice(config, Grid(9, 4.0))
    assert "sample to zero" in info.value.message


@pytest.mark.slow
def test_forced_klein_gordon_converges_at_fourth_order(short_run):
    errors = _final_mms_errors(short_run("forced-kg", s_end=2.4, h=h, cadence=100) for h in (0.15, 0.075))
    assert errors[1] < 1e-2
    assert errors[0] / errors[1] >= 2 ** 3.5


@pytest.mark.slow
def test_coupled_wave_klein_gordon_converges_at_fourth_order(short_run):
    exact = [f"0.1*cos(t)*{SMOOTH_BUMP}", f"0.1*sin(t)*{SMOOTH_BUMP}"]
    errors = _final_mms_errors(with_manufactured_solution(short_run("wkg", s_end=2.4, h=h, cadence=100), exact)
                               for h in (0.15, 0.075))
    assert errors[0] / errors[1] >= 2 ** 3.5


@pytest.mark.slow
def test_quasilinear_wave_converges_at_fourth_order():
    exact = [f"0.1*cos(t)*{SMOOTH_BUMP}"]
    configs = (with_manufactured_solution(SolverConfig(spec=SAMPLE_QUASILINEAR_SPEC, s0=2.0, s_end=2.4, h=h,
                                                       zi_order=0, cadence=100), exact)
               for h in (0.15, 0.075))
    errors = _final_mms_errors(configs)
    assert errors[0] / errors[1] >= 2 ** 3.5


@pytest.mark.slow
def test_free_wave_energy_drift_stays_below_tolerance(short_run):
    smooth = {"components": [{"value": {"kind": "bump", "amplitude": 1.0, "radius": 1.2, "power": 6}}]}
    result = evolve(short_run("free-wave", s_end=3.0, h=0.1, cadence=5, initial_data=smooth))
    assert result.status == "completed"
    energies = [sample.energy for sample in result.flux_trace]
    assert max(abs(e / energies[0] - 1.0) for e in energies) < 1e-3


@pytest.mark.slow
def test_energy_identity_holds_on_a_forced_run(short_run):
    residuals = []
    for h in (0.25, 0.125):
        result = evolve(short_run("forced-kg", s_end=2.4, h=h))
        identity = energy_identity_residual(result.flux_trace)
        assert identity.cadence_ok
        residuals.append(identity.residual)
    assert residuals[1] < 1e-3
    assert residuals[0] / residuals[1] >= 2 ** 1.5


@pytest.mark.slow
def test_klein_gordon_weighted_decay_stays_bounded(short_run):
    result = evolve(short_run("linear-kg", s_end=4.0, h=0.2, cadence=2))
    assert result.status == "completed"
    series = result.series("v.sup_sigma_t32_v")
    early = max(value for s, value in series if s <= 3.0)
    late = max(value for s, value in series if s >= 3.0)
    assert 0.0 < late <= 2.0 * early


@pytest.mark.slow
@pytest.mark.parametrize("name", ["null-wave", "nonnull-wave"])
def test_small_data_wave_energies_stay_in_band(short_run, name):
    result = evolve(short_run(name, s_end=3.0, h=0.2, cadence=2))
    assert result.status == "completed"
    verdict = energy_band_verdict(result.reports)
    assert verdict["within"]
    assert not verdict["growth"]
