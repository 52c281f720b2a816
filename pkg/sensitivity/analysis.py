"""
Output phase error of an injection-locked ring under an injection phase error.

An error theta on one injection phase splits into a common-mode part, which
rotates every node, and a differential part theta/N that moves the perturbed
node's injection against its neighbour. With phi0 and psi held at their
locked values, the per-node output shift alpha satisfies

    k*sin(phi0 - psi - theta/N + alpha) = sin(psi - 2*alpha)

and the quadrature error is 2*alpha.
"""
import math
from logging import getLogger
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from ilro.exceptions import ConfigurationError, SingularityError, UnlockedError
from phasor.models import LockState, OscillatorConfig
from phasor.solvers import (
    lock_node_phasors,
    lock_residual,
    locking_range,
    psi_from_geometry,
    solve_lock_state,
    with_free_running_frequency,
)
from phasor.utils import bisect_boundary, safeguarded_newton
from .models import ErrorPerturbation, SensitivityResult, ZeroSensitivityResult

logger = getLogger(__name__)

MAX_THETA: float = 0.5
ALPHA_TOL: float = 1e-15
ZERO_SCAN_POINTS: int = 129
ZERO_ABS_TOL: float = 1e3


def _require_locked(lock: LockState) -> None:
    if not lock.locked:
        raise UnlockedError(f"lock state at f_fr={lock.f_fr:.6e} Hz is not locked")


def _check_stages(n_stages: int) -> None:
    if isinstance(n_stages, bool) or not isinstance(n_stages, int) or n_stages < 2:
        raise ConfigurationError('n_stages', 'must be an integer >= 2', n_stages)


def lock_state_from_geometry(k_inj: float, phi0: float, f_inj: float = 7.0e9, f_fr: float = math.nan) -> LockState:
    """Bare lock state carrying only (k, phi0) and the psi they imply."""
    return LockState(f_fr=f_fr, f_inj=f_inj, k_inj=k_inj, locked=True, phi0=phi0,
                     psi=psi_from_geometry(k_inj, phi0))


def solve_output_error(lock: LockState, theta: float, n_stages: int) -> ErrorPerturbation:
    _require_locked(lock)
    _check_stages(n_stages)
    if not math.isfinite(theta) or abs(theta) > MAX_THETA:
        raise ConfigurationError('theta', f"must satisfy |theta| <= {MAX_THETA} rad", theta)
    if theta == 0.0:
        return ErrorPerturbation(theta=0.0, n_stages=n_stages, alpha=0.0)

    k, psi = lock.k_inj, lock.psi
    offset = lock.phi0 - psi - theta / n_stages

    def residual(alpha: float) -> float:
        return k * math.sin(offset + alpha) - math.sin(psi - 2.0 * alpha)

    def slope(alpha: float) -> float:
        return k * math.cos(offset + alpha) + 2.0 * math.cos(psi - 2.0 * alpha)

    # sin(psi - 2*alpha) runs from +1 to -1 across this bracket while |k*sin| < 1
    lo, hi = 0.5 * (psi - 0.5 * math.pi), 0.5 * (psi + 0.5 * math.pi)
    alpha = safeguarded_newton(residual, slope, lo, hi, x0=0.0, tol=ALPHA_TOL)
    return ErrorPerturbation(theta=theta, n_stages=n_stages, alpha=alpha)


def sensitivity_closed_form(lock: LockState, n_stages: int) -> float:
    _require_locked(lock)
    _check_stages(n_stages)
    cos_psi = math.cos(lock.psi)
    if abs(cos_psi) < 1e-15:
        raise SingularityError('cos(psi) vanishes')
    return lock.k_inj * math.cos(lock.phi0 + lock.psi) / cos_psi / n_stages


def sensitivity_rederived(lock: LockState, n_stages: int) -> float:
    """Implicit derivative of the output-error equation at theta = 0."""
    _require_locked(lock)
    _check_stages(n_stages)
    projection = lock.k_inj * math.cos(lock.phi0 - lock.psi)
    denominator = projection + 2.0 * math.cos(lock.psi)
    if abs(denominator) < 1e-15:
        raise SingularityError('output-error equation is singular at this lock state')
    return 2.0 * projection / denominator / n_stages


def sensitivity_approx(k_inj: float, phi0: float, n_stages: int) -> float:
    if not 0.0 <= k_inj < 1.0:
        raise ConfigurationError('k_inj', 'must satisfy 0 <= k_inj < 1', k_inj)
    _check_stages(n_stages)
    return k_inj * math.cos(phi0) / n_stages


def sensitivity_finite_difference(lock: LockState, n_stages: int, step: float = 1e-6) -> float:
    if not 0.0 < step <= 1e-3:
        raise ConfigurationError('step', 'must satisfy 0 < step <= 1e-3 rad', step)
    forward = solve_output_error(lock, step, n_stages).quadrature_error
    backward = solve_output_error(lock, -step, n_stages).quadrature_error
    return (forward - backward) / (2.0 * step)


def evaluate_sensitivity(lock: LockState, n_stages: int, step: float = 1e-6,
                         oracle: Optional[float] = None) -> SensitivityResult:
    return SensitivityResult(
        implicit=sensitivity_finite_difference(lock, n_stages, step),
        closed_form=sensitivity_closed_form(lock, n_stages),
        closed_form_rederived=sensitivity_rederived(lock, n_stages),
        approx=sensitivity_approx(lock.k_inj, lock.phi0, n_stages),
        oracle=oracle,
    )


def lock_state_from_phi0(config: OscillatorConfig, phi0: float,
                         bounds: Optional[Tuple[float, float]] = None) -> LockState:
    """
    Lock state with the requested phi0 at the config's k and f_inj, reached
    by retuning the free-running frequency. Unlocked when phi0 is not on the
    stable branch anywhere in the locking range.
    """
    k = config.injection_ratio
    lo, hi = locking_range(config) if bounds is None else bounds
    unlocked = LockState(f_fr=math.nan, f_inj=config.f_inj, k_inj=k, locked=False)
    if hi <= lo:
        return unlocked

    def residual(f_fr: float) -> float:
        g, _ = lock_residual(with_free_running_frequency(config, f_fr), f_fr)
        return g(phi0)

    r_lo, r_hi = residual(lo), residual(hi)
    if r_lo * r_hi > 0.0:
        logger.debug("phi0=%.4f rad not reachable inside %.6e .. %.6e Hz", phi0, lo, hi)
        return unlocked
    f_fr = optimize.brentq(residual, lo, hi, xtol=1e-3, rtol=4 * np.finfo(float).eps)
    tuned = with_free_running_frequency(config, f_fr)
    _, dg = lock_residual(tuned, f_fr)
    if dg(phi0) <= 0.0:
        return unlocked
    psi = psi_from_geometry(k, phi0)
    return LockState(f_fr=f_fr, f_inj=config.f_inj, k_inj=k, locked=True, phi0=phi0, psi=psi,
                     node_phasors=lock_node_phasors(tuned, f_fr, phi0, psi))


def _rederived_at(config: OscillatorConfig, f_fr: float) -> float:
    state = solve_lock_state(with_free_running_frequency(config, f_fr), f_fr=f_fr, phasors=False)
    if not state.locked:
        return math.nan
    return sensitivity_rederived(state, config.n_stages)


def find_zero_sensitivity_frequency(config: OscillatorConfig, points: int = ZERO_SCAN_POINTS) -> ZeroSensitivityResult:
    """
    Free-running frequencies inside the locking range where the sensitivity
    crosses zero, each located to 1 kHz. f_opt is the crossing above f_inj
    when there is one.
    """
    lo, hi = locking_range(config)
    result = ZeroSensitivityResult(k_inj=config.injection_ratio, f_inj=config.f_inj, locking_range=(lo, hi))
    if hi <= lo:
        return result
    margin = 1e-6 * (hi - lo)
    grid = np.linspace(lo + margin, hi - margin, points)
    values = [_rederived_at(config, float(f)) for f in grid]

    crossings: List[float] = []
    for (fa, va), (fb, vb) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        if math.isnan(va) or math.isnan(vb):
            continue
        if va == 0.0:
            crossings.append(float(fa))
        elif va * vb < 0.0:
            positive = va > 0.0
            inside, outside = bisect_boundary(lambda f: (_rederived_at(config, f) > 0.0) == positive,
                                              float(fa), float(fb), rtol=ZERO_ABS_TOL / float(fb))
            crossings.append(0.5 * (inside + outside))
    if not crossings:
        logger.warning("no zero-sensitivity point inside the locking range %.6e .. %.6e Hz (k=%.3f)",
                       lo, hi, config.injection_ratio)
        return result

    above = [f for f in crossings if f > config.f_inj]
    f_opt = above[0] if above else crossings[0]
    logger.debug("zero-sensitivity crossings %s, f_opt %.6e Hz", crossings, f_opt)
    return ZeroSensitivityResult(k_inj=config.injection_ratio, f_inj=config.f_inj, locking_range=(lo, hi),
                                 crossings=tuple(crossings), f_opt=f_opt)


__all__ = (
    'MAX_THETA',
    'lock_state_from_geometry',
    'solve_output_error',
    'sensitivity_closed_form',
    'sensitivity_rederived',
    'sensitivity_approx',
    'sensitivity_finite_difference',
    'evaluate_sensitivity',
    'lock_state_from_phi0',
    'find_zero_sensitivity_frequency',
)
