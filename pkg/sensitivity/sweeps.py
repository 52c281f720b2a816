import math
from dataclasses import replace
from functools import partial
from logging import getLogger
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ilro.exceptions import ConfigurationError
from ilro.workers import map_ordered
from phasor.models import LockState, OscillatorConfig
from phasor.solvers import locking_range, solve_lock_state, with_free_running_frequency
from .analysis import evaluate_sensitivity, lock_state_from_phi0, solve_output_error
from .models import SweepAxis, SweepRow

logger = getLogger(__name__)

PHI0_STEP: float = math.radians(5.0)
F_FR_STEP: float = 50.0e6
THETA_STEP: float = math.radians(1.0)


def default_grid(config: OscillatorConfig, axis: SweepAxis) -> List[float]:
    axis = SweepAxis(axis)
    if axis is SweepAxis.PHI0:
        return [i * PHI0_STEP for i in range(19)]
    if axis is SweepAxis.THETA:
        return [i * THETA_STEP for i in range(-10, 11)]
    lo, hi = locking_range(config)
    if hi <= lo:
        return [config.f_inj]
    start = math.ceil(lo / F_FR_STEP) * F_FR_STEP
    grid = [float(f) for f in np.arange(start, hi, F_FR_STEP) if lo < f < hi]
    return grid or [0.5 * (lo + hi)]


def _row_for_state(axis: SweepAxis, value: float, state: LockState, n_stages: int, step: float) -> SweepRow:
    if not state.locked:
        return SweepRow(axis=axis, value=value, locked=False, f_fr=state.f_fr, k_inj=state.k_inj)
    return SweepRow(axis=axis, value=value, locked=True, f_fr=state.f_fr, k_inj=state.k_inj, phi0=state.phi0,
                    psi=state.psi, sensitivity=evaluate_sensitivity(state, n_stages, step))


def _phi0_row(config: OscillatorConfig, bounds: Tuple[float, float], step: float, phi0: float) -> SweepRow:
    return _row_for_state(SweepAxis.PHI0, phi0, lock_state_from_phi0(config, phi0, bounds), config.n_stages, step)


def _f_fr_row(config: OscillatorConfig, step: float, f_fr: float) -> SweepRow:
    state = solve_lock_state(with_free_running_frequency(config, f_fr), f_fr=f_fr)
    return _row_for_state(SweepAxis.F_FR, f_fr, state, config.n_stages, step)


def _theta_row(state: LockState, n_stages: int, step: float, theta: float) -> SweepRow:
    row = _row_for_state(SweepAxis.THETA, theta, state, n_stages, step)
    if not row.locked:
        return row
    error = solve_output_error(state, theta, n_stages)
    return replace(row, quadrature_error=error.quadrature_error)


def sweep_sensitivity(config: OscillatorConfig, axis: SweepAxis, grid: Optional[Sequence[float]] = None,
                      step: float = 1e-6, jobs: Optional[int] = None) -> List[SweepRow]:
    """
    One row per grid point, in grid order. phi0 and theta grids are in
    radians, f_fr grids in hertz. Rows that fail to lock are kept with
    locked=False.
    """
    axis = SweepAxis(axis)
    grid = default_grid(config, axis) if grid is None else [float(x) for x in grid]
    if not grid:
        raise ConfigurationError('grid', 'must not be empty')
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError('grid', 'must be strictly increasing')

    if axis is SweepAxis.PHI0:
        worker = partial(_phi0_row, config, locking_range(config), step)
    elif axis is SweepAxis.F_FR:
        worker = partial(_f_fr_row, config, step)
    else:
        worker = partial(_theta_row, solve_lock_state(config), config.n_stages, step)

    rows = map_ordered(worker, grid, jobs)
    unlocked = [row.value for row in rows if not row.locked]
    if unlocked:
        logger.warning("%d of %d %s grid points did not lock: %s", len(unlocked), len(rows), axis.value, unlocked)
    return rows


__all__ = (
    'PHI0_STEP',
    'F_FR_STEP',
    'THETA_STEP',
    'default_grid',
    'sweep_sensitivity',
)
