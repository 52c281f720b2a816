import itertools
import math

import pytest
from hypothesis import given, strategies as st

from ilro.exceptions import ConfigurationError, UnlockedError
from phasor.models import LockState
from phasor.reference import reference_config
from phasor.solvers import solve_lock_state, solve_network, with_free_running_frequency
from sensitivity.analysis import (
    evaluate_sensitivity,
    lock_state_from_geometry,
    lock_state_from_phi0,
    sensitivity_approx,
    sensitivity_closed_form,
    sensitivity_finite_difference,
    sensitivity_rederived,
    solve_output_error,
)

K_GRID = (0.05, 0.10, 0.15, 0.20)
PHI0_GRID = tuple(math.radians(d) for d in (0, 15, 30, 45, 60, 75))
STANDARD_GRID = list(itertools.product(K_GRID, PHI0_GRID, (2, 4)))


def test_zero_error_gives_zero_shift():
    error = solve_output_error(lock_state_from_geometry(0.1, 0.4), 0.0, 2)
    assert error.alpha == 0.0
    assert error.quadrature_error == 0.0


def test_small_error_at_zero_detuning():
    error = solve_output_error(lock_state_from_geometry(0.1, 0.0), 0.01, 2)
    assert error.quadrature_error == pytest.approx(0.0005, rel=0.06)
    assert abs(error.alpha) < math.pi / 2


@pytest.mark.parametrize('k, phi0, n', [(0.1, 0.3, 2), (0.2, -0.5, 4), (0.05, 1.2, 8)])
def test_output_error_satisfies_the_triangle_equation(k, phi0, n):
    lock = lock_state_from_geometry(k, phi0)
    theta = 0.05
    alpha = solve_output_error(lock, theta, n).alpha
    residual = k * math.sin(lock.phi0 - lock.psi - theta / n + alpha) - math.sin(lock.psi - 2 * alpha)
    assert abs(residual) < 1e-12


def test_output_error_preconditions():
    with pytest.raises(UnlockedError):
        solve_output_error(LockState(f_fr=7e9, f_inj=8e9, k_inj=0.1, locked=False), 0.01, 2)
    with pytest.raises(ConfigurationError):
        solve_output_error(lock_state_from_geometry(0.1, 0.0), 0.6, 2)


def test_closed_form_examples():
    lock = lock_state_from_geometry(0.15, 0.7)
    assert sensitivity_closed_form(lock, 2) == pytest.approx(
        0.5 * 0.15 * math.cos(lock.phi0 + lock.psi) / math.cos(lock.psi), abs=1e-15)
    orthogonal = LockState(f_fr=7e9, f_inj=7e9, k_inj=0.1, locked=True, phi0=1.2, psi=math.pi / 2 - 1.2)
    assert sensitivity_closed_form(orthogonal, 2) == pytest.approx(0.0, abs=1e-15)
    assert sensitivity_closed_form(lock_state_from_geometry(0.0, 0.3), 4) == 0.0


def test_approx_examples():
    assert sensitivity_approx(0.1, 0.0, 2) == pytest.approx(0.05)
    assert sensitivity_approx(0.17, math.pi / 2, 3) == pytest.approx(0.0, abs=1e-12)
    assert sensitivity_approx(0.2, math.pi / 3, 4) == pytest.approx(0.025)
    with pytest.raises(ConfigurationError):
        sensitivity_approx(1.0, 0.0, 2)


@pytest.mark.parametrize('k, phi0, n', STANDARD_GRID)
def test_rederived_form_matches_the_implicit_solve(k, phi0, n):
    result = evaluate_sensitivity(lock_state_from_geometry(k, phi0), n)
    assert result.oracle_matching == result.closed_form_rederived
    assert result.oracle_matching == pytest.approx(result.implicit, rel=1e-6)
    assert abs(result.closed_form - result.closed_form_rederived) < k * k


@pytest.mark.parametrize('k, phi0, n', STANDARD_GRID)
def test_printed_form_reduces_to_the_approximation_without_correction(k, phi0, n):
    lock = LockState(f_fr=7e9, f_inj=7e9, k_inj=k, locked=True, phi0=phi0, psi=0.0)
    assert abs(sensitivity_closed_form(lock, n) - sensitivity_approx(k, phi0, n)) < 1e-12


@pytest.mark.parametrize('k, phi0', list(itertools.product(K_GRID, PHI0_GRID)))
def test_sensitivity_scales_inversely_with_stage_count(k, phi0):
    lock = lock_state_from_geometry(k, phi0)
    assert abs(sensitivity_closed_form(lock, 4) - 0.5 * sensitivity_closed_form(lock, 2)) < 1e-12
    assert abs(sensitivity_rederived(lock, 4) - 0.5 * sensitivity_rederived(lock, 2)) < 1e-12


@pytest.mark.parametrize('k', K_GRID)
def test_rederived_and_approximation_differ_at_second_order(k):
    lock = lock_state_from_geometry(k, 0.0)
    gap = sensitivity_approx(k, 0.0, 2) - sensitivity_rederived(lock, 2)
    assert gap == pytest.approx(k * k / (2 * (2 + k)), rel=1e-9)


def test_finite_difference_is_step_robust():
    lock = lock_state_from_geometry(0.2, math.radians(40))
    coarse = sensitivity_finite_difference(lock, 2, 1e-5)
    fine = sensitivity_finite_difference(lock, 2, 5e-6)
    assert abs(coarse - fine) < 1e-8
    with pytest.raises(ConfigurationError):
        sensitivity_finite_difference(lock, 2, 0.01)


@given(st.floats(0.01, 0.9), st.floats(-math.pi, math.pi))
def test_closed_form_sign_follows_the_projection(k, phi0):
    lock = lock_state_from_geometry(k, phi0)
    projection = math.cos(lock.phi0 + lock.psi)
    value = sensitivity_closed_form(lock, 2)
    if abs(projection) > 1e-9:
        assert math.copysign(1.0, value) == math.copysign(1.0, projection)


def test_lock_state_from_phi0_round_trips_through_the_solver():
    config = reference_config(2, 0.1)
    state = lock_state_from_phi0(config, math.radians(30))
    assert state.locked
    again = solve_lock_state(with_free_running_frequency(config, state.f_fr))
    assert again.phi0 == pytest.approx(math.radians(30), abs=1e-6)
    assert again.psi == pytest.approx(state.psi, abs=1e-6)


def test_lock_state_from_phi0_flags_the_unstable_branch():
    state = lock_state_from_phi0(reference_config(2, 0.1), math.radians(100))
    assert not state.locked
    assert state.phi0 is None


@pytest.mark.parametrize('phi0_deg', [0, 30, 60])
def test_two_stage_network_slope_matches_rederived_form(phi0_deg):
    config = reference_config(2, 0.1)
    state = lock_state_from_phi0(config, math.radians(phi0_deg))
    tuned = with_free_running_frequency(config, state.f_fr)
    x = 1e-5

    def quadrature(error):
        nodes = solve_network(tuned, injection_errors=[error, -error]).node_phasors
        return nodes[0].angle_to(nodes[1]) + math.pi / 2

    slope = (quadrature(x) - quadrature(-x)) / (2 * x) / 2
    assert slope == pytest.approx(sensitivity_rederived(state, 2), rel=1e-5)
