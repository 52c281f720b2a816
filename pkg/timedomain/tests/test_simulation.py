import math
from dataclasses import replace

import numpy as np
import pytest

from ilro.exceptions import ConfigurationError
from phasor.models import OscillatorConfig
from phasor.reference import am_pm_reference_config, reference_config
from phasor.solvers import (
    free_running_frequency,
    locking_range,
    solve_lock_state,
    with_free_running_frequency,
)
from sensitivity.analysis import evaluate_sensitivity
from timedomain.integrator import initial_state, simulate, simulate_batch, stage_delays
from timedomain.measurements import (
    detect_lock,
    extract_phases,
    measure_free_running,
    measure_sensitivity_sim,
    simulate_quadrature_errors,
    fit_slope,
)
from timedomain.models import SimSettings

F_INJ = 7e9
SHORT = SimSettings.for_frequency(F_INJ, settle_periods=200, measure_periods=64)
FULL = SimSettings.for_frequency(F_INJ)


def test_am_pm_is_rejected():
    with pytest.raises(ConfigurationError) as info:
        simulate(am_pm_reference_config(0.1), SHORT)
    assert info.value.field == 'am_pm_coeff'


def test_delay_must_span_a_time_step():
    config = reference_config(2, 0.1)
    stage = replace(config.stages[0], theta_vi0=1e-4)
    with pytest.raises(ConfigurationError):
        stage_delays(config.replace(stages=(stage, stage)), F_INJ, SHORT.dt)
    assert stage_delays(reference_config(4, 0.1), F_INJ, SHORT.dt) == pytest.approx([0.0] * 4)


def test_batch_requires_a_common_time_grid():
    with pytest.raises(ConfigurationError):
        simulate_batch([reference_config(2, 0.1), reference_config(4, 0.1)], SHORT)


@pytest.mark.slow
def test_determinism():
    config = reference_config(2, 0.1)
    first = simulate(config, SHORT)
    second = simulate(config, SHORT)
    assert np.array_equal(first.nodes, second.nodes)
    batched = simulate_batch([config, config], SHORT)
    assert np.array_equal(batched[1].nodes, first.nodes)


@pytest.mark.slow
def test_ideal_two_stage_injection_is_in_quadrature():
    config = with_free_running_frequency(reference_config(2, 0.1), 7.2e9)
    reading = extract_phases(simulate(config, SHORT), SHORT)
    assert detect_lock(reading, SHORT)
    assert math.degrees(reading.spacing(0)) == pytest.approx(90.0, abs=0.2)
    assert math.degrees(reading.spacing(1)) == pytest.approx(90.0, abs=0.2)


@pytest.mark.slow
@pytest.mark.parametrize('offset_deg', [1.0, 5.0])
def test_common_injection_offset_rotates_every_node(offset_deg):
    config = reference_config(4, 0.15)
    offset = math.radians(offset_deg)
    runs = simulate_batch([config, config], SHORT, [[0.0] * 4, [offset] * 4])
    base, shifted = [extract_phases(w, SHORT) for w in runs]
    for before, after in zip(base.node_phases, shifted.node_phases):
        assert math.degrees(after - before) == pytest.approx(offset_deg, abs=0.05)
    for node in range(3):
        assert math.degrees(shifted.spacing(node) - base.spacing(node)) == pytest.approx(0.0, abs=0.02)


@pytest.mark.slow
def test_step_size_robustness():
    config = reference_config(2, 0.1)
    fine = SimSettings.for_frequency(F_INJ, samples_per_period=400, settle_periods=200, measure_periods=64)
    coarse_phases = extract_phases(simulate(config, SHORT), SHORT).node_phases
    fine_phases = extract_phases(simulate(config, fine), fine).node_phases
    assert np.degrees(np.subtract(coarse_phases, fine_phases)) == pytest.approx([0.0, 0.0], abs=0.01)


@pytest.mark.slow
def test_detuning_outside_the_locking_range_is_detected():
    config = reference_config(2, 0.05)
    lo, hi = locking_range(config)
    centre = extract_phases(simulate(config, SHORT), SHORT)
    outside = extract_phases(simulate(with_free_running_frequency(config, hi + 0.5 * (hi - lo)), SHORT), SHORT)
    assert detect_lock(centre, SHORT)
    assert not detect_lock(outside, SHORT)


@pytest.mark.slow
@pytest.mark.parametrize('scale', [
    dict(),
    dict(r_load=1.2),
    dict(r_load=0.8),
    dict(c_load=1.2),
    dict(c_load=0.8),
])
def test_free_running_frequency_cross_oracle(scale):
    config = reference_config(2, 0.0)
    stage = config.stages[0]
    stage = replace(stage, **{name: getattr(stage, name) * factor for name, factor in scale.items()})
    config = OscillatorConfig.uniform(2, stage, 0.0, F_INJ)
    measured = measure_free_running(config, FULL)
    assert measured == pytest.approx(free_running_frequency(config), rel=0.02)


@pytest.mark.slow
def test_doubling_capacitance_halves_frequency():
    config = reference_config(2, 0.0)
    doubled = config.replace(stages=tuple(replace(s, c_load=2 * s.c_load) for s in config.stages))
    ratio = measure_free_running(doubled, FULL) / measure_free_running(config, FULL)
    assert ratio == pytest.approx(0.5, rel=0.05)


@pytest.mark.slow
def test_stronger_injection_raises_simulated_sensitivity():
    weak = measure_sensitivity_sim(reference_config(2, 0.05), SHORT)
    strong = measure_sensitivity_sim(reference_config(2, 0.2), SHORT)
    assert strong > weak > 0.0


@pytest.mark.slow
def test_symmetric_theta_grid_has_negligible_intercept():
    grid = [math.radians(d) for d in (-2.0, -1.0, 0.0, 1.0, 2.0)]
    points = simulate_quadrature_errors(reference_config(2, 0.1), SHORT, grid)
    _, intercept = fit_slope(points)
    assert abs(math.degrees(intercept)) < 0.02


@pytest.mark.slow
@pytest.mark.parametrize('n_stages', [2, 4])
@pytest.mark.parametrize('k', [0.05, 0.2])
@pytest.mark.parametrize('position', [-0.4, 0.0, 0.4])
def test_simulated_sensitivity_matches_the_closed_form(n_stages, k, position):
    config = reference_config(n_stages, k)
    lo, hi = locking_range(config)
    tuned = with_free_running_frequency(config, 0.5 * (lo + hi) + position * (hi - lo))
    expected = evaluate_sensitivity(solve_lock_state(tuned), n_stages).oracle_matching
    assert measure_sensitivity_sim(tuned, FULL) == pytest.approx(expected, rel=0.10)


def test_initial_state_takes_explicit_complements():
    config = reference_config(2, 0.1)
    mirrored = SimSettings.for_frequency(F_INJ, v_init=(0.05, -0.02))
    explicit = SimSettings.for_frequency(F_INJ, v_init=(0.05, -0.02, 0.01, 0.03))
    assert initial_state(2, 0.3, mirrored).tolist() == [[0.05, -0.02], [-0.05, 0.02]]
    assert initial_state(2, 0.3, explicit).tolist() == [[0.05, -0.02], [0.01, 0.03]]
    with pytest.raises(ConfigurationError):
        initial_state(2, 0.3, SimSettings.for_frequency(F_INJ, v_init=(0.05, 0.0, 0.01)))
    with pytest.raises(ConfigurationError) as info:
        simulate(config.replace(stages=(replace(config.stages[0], gm_cross=0.3e-3),) * 2), SHORT)
    assert info.value.field == 'gm_cross'


@pytest.mark.slow
def test_symmetric_start_keeps_complements_mirrored():
    w = simulate(reference_config(2, 0.1), SHORT)
    assert np.array_equal(w.complements, -w.nodes)


@pytest.mark.slow
@pytest.mark.parametrize('gm_cross', [0.0, 0.01e-3])
def test_complements_settle_in_antiphase(gm_cross):
    config = reference_config(2, 0.2)
    stage = replace(config.stages[0], gm_cross=gm_cross)
    config = config.replace(stages=(stage, stage))
    # both sides of every pair start on the same polarity: a large common mode
    settings = SimSettings.for_frequency(F_INJ, settle_periods=200, measure_periods=64,
                                         v_init=(0.03, -0.03, 0.01, -0.01))
    w = simulate(config, settings)
    reading = extract_phases(w, settings)
    assert detect_lock(reading, settings)
    assert np.degrees(np.abs(reading.complement_offsets)).max() < 0.1
    common = 0.5 * (w.nodes + w.complements)
    assert np.abs(common).max() < 1e-6 * np.abs(w.nodes).max()
