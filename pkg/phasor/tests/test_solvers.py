import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ilro.exceptions import ConfigurationError, NoOscillationError, StartupError
from phasor.models import OscillatorConfig, StageModel
from phasor.reference import am_pm_reference_config, reference_config
from phasor.solvers import (
    free_running_frequency,
    locked_reference,
    locking_range,
    loop_phase_residual,
    psi_from_geometry,
    psi_slope,
    reference_amplitude,
    solve_lock_state,
    stage_current_fundamental,
    stage_phase_response,
    with_free_running_frequency,
)

F_3DB = StageModel().f_3db


def ring(n_stages, theta_vi0=0.0, k_inj=0.1, f_inj=7e9, **stage):
    return OscillatorConfig.uniform(n_stages, StageModel(theta_vi0=theta_vi0, **stage), k_inj, f_inj)


def test_stage_phase_response_at_corner():
    assert stage_phase_response(F_3DB, StageModel()) == pytest.approx(math.pi - math.pi / 4)


def test_stage_phase_response_am_pm_inactive_at_reference_amplitude():
    plain = stage_phase_response(5e9, StageModel())
    assert stage_phase_response(5e9, StageModel(am_pm_coeff=-3.0), 1.0) == pytest.approx(plain)
    assert stage_phase_response(5e9, StageModel(am_pm_coeff=-3.0), 1.1) == pytest.approx(plain + 0.3)


def test_stage_phase_response_near_dc():
    assert stage_phase_response(1e-3, StageModel()) == pytest.approx(math.pi, abs=1e-9)


def test_stage_phase_response_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        stage_phase_response(-1.0, StageModel())
    with pytest.raises(ConfigurationError):
        stage_phase_response(1e9, StageModel(), 0.0)


@pytest.mark.parametrize('n_stages, theta_vi0', [(2, math.pi / 4), (4, 0.0)])
def test_free_running_frequency_at_corner(n_stages, theta_vi0):
    config = ring(n_stages, theta_vi0)
    f_fr = free_running_frequency(config)
    assert f_fr == pytest.approx(F_3DB, rel=1e-9)
    assert abs(loop_phase_residual(f_fr, config)) < 1e-12


def test_two_stage_ring_without_excess_phase_cannot_oscillate():
    with pytest.raises(NoOscillationError):
        free_running_frequency(ring(2, 0.0))


def test_free_running_frequency_monotonicity():
    base = free_running_frequency(ring(4))
    assert free_running_frequency(ring(4, r_load=1.1e3)) < base
    assert free_running_frequency(ring(4, theta_vi0=0.1)) < base


def test_free_running_frequency_with_mismatched_stages():
    stages = (StageModel(), StageModel(c_load=StageModel().c_load * 1.02), StageModel(), StageModel())
    config = OscillatorConfig(n_stages=4, stages=stages, injection_ratio=0.1, f_inj=7e9)
    f_fr = free_running_frequency(config)
    assert f_fr < F_3DB
    assert abs(loop_phase_residual(f_fr, config)) < 1e-12


def test_with_free_running_frequency_is_exact():
    config = with_free_running_frequency(reference_config(4, 0.1), 7.3e9)
    assert free_running_frequency(config) == pytest.approx(7.3e9, rel=1e-12)


def test_reference_config_for_long_ring_runs_at_injection_frequency():
    assert free_running_frequency(reference_config(8, 0.1)) == pytest.approx(7e9, rel=1e-9)


def test_psi_from_geometry_examples():
    assert psi_from_geometry(0.3, 0.0) == 0.0
    assert psi_from_geometry(0.2, math.pi / 2) == pytest.approx(math.atan(0.2))
    grid = np.linspace(-math.pi, math.pi, 200001)
    peak = max(abs(psi_from_geometry(0.1, phi)) for phi in grid)
    assert peak == pytest.approx(math.asin(0.1), abs=1e-8)


def test_psi_from_geometry_rejects_strong_injection():
    with pytest.raises(ConfigurationError):
        psi_from_geometry(1.0, 0.0)


@given(st.floats(0.0, 0.95), st.floats(-math.pi, math.pi))
def test_psi_bound(k, phi):
    assert abs(psi_from_geometry(k, phi)) <= math.asin(k) + 1e-12


@given(st.floats(0.01, 0.9), st.floats(-3.0, 3.0))
def test_psi_slope_matches_central_difference(k, phi):
    h = 1e-6
    numeric = (psi_from_geometry(k, phi + h) - psi_from_geometry(k, phi - h)) / (2 * h)
    assert psi_slope(k, phi) == pytest.approx(numeric, rel=1e-5, abs=1e-7)


def test_reference_amplitude_balances_the_loop():
    config = reference_config(2, 0.1)
    a_ref, i_osc = reference_amplitude(config)
    z = abs(config.stages[0].impedance(free_running_frequency(config)))
    assert i_osc * z == pytest.approx(a_ref, rel=1e-9)
    assert stage_current_fundamental(config.stages[0], a_ref) == pytest.approx(i_osc)
    assert i_osc < 4 / math.pi * config.stages[0].gm_peak


def test_locked_reference_balances_the_injected_loop():
    config = reference_config(2, 0.1)
    stage = config.stages[0]
    a_free, _ = reference_amplitude(config)
    a_lock, i_lock = locked_reference(config)
    lock = solve_lock_state(config)
    gain = abs(stage.impedance(config.f_inj)) * abs(1.0 + 0.1 * np.exp(1j * lock.phi0))
    assert i_lock * gain == pytest.approx(a_lock, rel=1e-9)
    assert a_lock > a_free
    assert locked_reference(config.replace(injection_ratio=0.0)) == reference_amplitude(config)


def test_reference_amplitude_needs_loop_gain():
    with pytest.raises(StartupError):
        reference_amplitude(ring(4, gm_peak=0.1e-3))


def test_zero_detuning_fixed_point():
    for config in (reference_config(2, 0.1), reference_config(4, 0.2)):
        state = solve_lock_state(config)
        assert state.locked
        assert state.phi0 == pytest.approx(0.0, abs=1e-9)
        assert state.psi == pytest.approx(0.0, abs=1e-9)


def test_lock_state_node_phasors_follow_ring_order():
    config = with_free_running_frequency(reference_config(4, 0.2), 7.1e9)
    state = solve_lock_state(config)
    assert state.locked
    spacing = [b.angle_to(a) for a, b in zip(state.node_phasors, state.node_phasors[1:])]
    assert spacing == pytest.approx([math.pi / 4] * 3)
    assert len({round(p.magnitude, 12) for p in state.node_phasors}) == 1


def test_no_injection_locks_only_at_zero_detuning():
    config = reference_config(2, 0.0)
    assert solve_lock_state(config).locked
    assert not solve_lock_state(with_free_running_frequency(config, 7.01e9)).locked
    assert locking_range(config) == (7e9, 7e9)


def test_locking_range_boundary_straddles_lock():
    config = reference_config(2, 0.1)
    lo, hi = locking_range(config)
    assert lo < config.f_inj < hi
    for inside, outside in ((lo * (1 + 1e-6), lo * (1 - 1e-6)), (hi * (1 - 1e-6), hi * (1 + 1e-6))):
        assert solve_lock_state(with_free_running_frequency(config, inside)).locked
        assert not solve_lock_state(with_free_running_frequency(config, outside)).locked


def test_locking_range_edge_reaches_psi_extremum():
    config = reference_config(2, 0.1)
    lo, hi = locking_range(config)
    for edge in (lo, hi):
        state = solve_lock_state(with_free_running_frequency(config, edge))
        assert state.locked
        assert abs(state.psi) == pytest.approx(math.asin(0.1), abs=1e-6)
        assert abs(state.phi0) == pytest.approx(math.acos(-0.1), abs=1e-3)


def test_locking_range_nests_with_injection_strength():
    lo_weak, hi_weak = locking_range(reference_config(2, 0.05))
    lo_strong, hi_strong = locking_range(reference_config(2, 0.10))
    assert lo_strong < lo_weak and hi_weak < hi_strong


def test_locking_range_along_injection_frequency():
    config = reference_config(4, 0.1)
    lo, hi = locking_range(config, axis='f_inj')
    assert lo < free_running_frequency(config) < hi
    assert solve_lock_state(config.replace(f_inj=hi * (1 - 1e-6))).locked
    assert not solve_lock_state(config.replace(f_inj=hi * (1 + 1e-6))).locked


def test_locking_range_rejects_unknown_axis():
    with pytest.raises(ConfigurationError):
        locking_range(reference_config(2, 0.1), axis='phase')


@settings(max_examples=25, deadline=None)
@given(st.floats(0.02, 0.3), st.floats(-0.8, 0.8))
def test_solved_states_sit_on_the_stable_branch(k, position):
    config = reference_config(2, k)
    lo, hi = locking_range(config)
    f_fr = 0.5 * (lo + hi) + 0.5 * position * (hi - lo)
    state = solve_lock_state(with_free_running_frequency(config, f_fr))
    assert state.locked
    assert abs(state.psi) <= math.asin(k) + 1e-9
    assert state.psi == pytest.approx(state.required_psi, abs=1e-9)
    h = 1e-6
    assert psi_from_geometry(k, state.phi0 + h) - psi_from_geometry(k, state.phi0 - h) > 0.0


def test_am_pm_shifts_zero_detuning_lock_point():
    state = solve_lock_state(am_pm_reference_config(0.1))
    assert state.locked
    assert abs(state.phi0) > 0.1
    assert state.psi == pytest.approx(state.required_psi, abs=1e-9)
    plain = solve_lock_state(reference_config(2, 0.1))
    assert state.required_psi != pytest.approx(plain.required_psi, abs=1e-3)


def test_solve_lock_state_needs_identical_stages():
    config = reference_config(2, 0.1)
    config = config.replace(stages=(config.stages[0], replace(config.stages[0], r_load=1.01e3)))
    with pytest.raises(ConfigurationError):
        solve_lock_state(config)
