import math
from logging import getLogger
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ilro import settings as ilro_settings
from ilro.exceptions import ConfigurationError, DeadNodeError, OutputError, PartialResultError, StartupError
from phasor.models import OscillatorConfig
from phasor.solvers import free_running_frequency, locked_reference
from phasor.utils import wrap_angle
from .integrator import simulate, simulate_batch
from .models import LockGeometry, PhaseReading, QuadraturePoint, SimSettings, Waveforms

logger = getLogger(__name__)

LOCK_PHASE_BUDGET: float = 0.01
DEAD_FRACTION: float = 1e-6
SEGMENT_PERIODS: int = 4
MIN_CYCLES: int = 256
DEFAULT_THETA_GRID: tuple = tuple(math.radians(d) for d in (-2.0, -1.0, 0.0, 1.0, 2.0))
PERTURBATION_MODES: tuple = ('differential', 'single')


def fundamental(series: np.ndarray, t: np.ndarray, f: float) -> np.ndarray:
    """One-bin DFT at f: complex amplitude A*exp(j*p) of A*cos(2*pi*f*t + p), per row."""
    basis = np.exp(-2j * math.pi * f * t)
    return 2.0 * (np.atleast_2d(series) @ basis) / t.shape[0]


def _segment_phases(w: Waveforms, samples_per_segment: int) -> np.ndarray:
    segments = w.n_samples // samples_per_segment
    usable = segments * samples_per_segment
    t = w.t[:usable].reshape(segments, samples_per_segment)
    x = w.nodes[:, :usable].reshape(w.nodes.shape[0], segments, samples_per_segment)
    basis = np.exp(-2j * math.pi * w.f_inj * t)
    return np.unwrap(np.angle(np.einsum('nsk,sk->ns', x, basis)), axis=1)


def extract_phases(w: Waveforms, settings: SimSettings) -> PhaseReading:
    """
    Fundamental phase and amplitude of every node at f_inj over the whole
    window, relative to the nominal injection phase of node 0. The drift rate
    compares the mean unwrapped phase of the two window halves; the
    complement offsets are how far each b node sits from 180 degrees behind
    its true node.
    """
    spp = settings.samples_per_period(w.f_inj)
    if w.n_samples % spp:
        raise ConfigurationError('measure_periods', 'the window must span whole injection periods', w.n_samples)
    values = fundamental(w.nodes, w.t, w.f_inj)
    amplitudes = np.abs(values)
    for node, amplitude in enumerate(amplitudes):
        if amplitude < DEAD_FRACTION * w.a_ref:
            raise DeadNodeError(node, float(amplitude))
    phases = tuple(wrap_angle(float(a) - w.reference_phase) for a in np.angle(values))
    complements = fundamental(w.complement_nodes, w.t, w.f_inj)
    offsets = tuple(wrap_angle(float(a) - math.pi) for a in np.angle(values) - np.angle(complements))

    segment_phases = _segment_phases(w, SEGMENT_PERIODS * spp)
    segments = segment_phases.shape[1]
    half = segments // 2
    separation = (segments - half) * SEGMENT_PERIODS / w.f_inj
    drift = (segment_phases[:, -half:].mean(axis=1) - segment_phases[:, :half].mean(axis=1)) / separation
    worst = float(drift[np.argmax(np.abs(drift))])
    return PhaseReading(node_phases=phases, amplitudes=tuple(float(a) for a in amplitudes), drift_rate=worst,
                        f_inj=w.f_inj, node_drift=tuple(float(d) for d in drift), complement_offsets=offsets)


def detect_lock(reading: PhaseReading, settings: SimSettings) -> bool:
    return abs(reading.drift_rate) * settings.window(reading.f_inj) < LOCK_PHASE_BUDGET


def zero_crossings(series: np.ndarray, t: np.ndarray, rising: bool = True) -> np.ndarray:
    """Linearly interpolated crossing times of zero in the given direction."""
    a, b = series[:-1], series[1:]
    mask = (a < 0.0) & (b >= 0.0) if rising else (a >= 0.0) & (b < 0.0)
    index = np.nonzero(mask)[0]
    fraction = a[index] / (a[index] - b[index])
    return t[index] + fraction * (t[index + 1] - t[index])


def measure_free_running(config: OscillatorConfig, settings: SimSettings) -> float:
    free = config.replace(injection_ratio=0.0)
    f_model = free_running_frequency(free)
    w = simulate(free, settings, f_ref=f_model)
    if np.max(np.abs(w.nodes[0])) < DEAD_FRACTION * w.a_ref:
        raise StartupError('oscillation died out before the measurement window')
    crossings = zero_crossings(w.nodes[0], w.t)
    if crossings.shape[0] < 2:
        raise StartupError('no sustained oscillation in the measurement window')
    if crossings.shape[0] - 1 < MIN_CYCLES:
        logger.warning("only %d cycles in the window; the frequency estimate is coarse", crossings.shape[0] - 1)
    f_measured = (crossings.shape[0] - 1) / (crossings[-1] - crossings[0])
    logger.debug("free-running: measured %.6e Hz, phasor model %.6e Hz", f_measured, f_model)
    return float(f_measured)


def measure_lock_geometry(config: OscillatorConfig, w: Waveforms, settings: SimSettings) -> LockGeometry:
    """
    Effective injection ratio, phi0 and psi of stage 0 measured from its
    oscillator current (transconductor plus cross-coupled pair), so the closed
    form can be evaluated at the simulator's operating point.
    """
    stage = config.stages[0]
    pairs = w.pair_voltages()
    d = pairs[1] if config.n_stages > 1 else -pairs[0]
    omega = 2.0 * math.pi * w.f_inj
    main = stage.gm_peak * np.tanh(d / (2.0 * stage.v_sat))
    cross = stage.gm_cross * np.tanh(pairs[0] / (2.0 * stage.v_sat))
    i_osc = (fundamental(main, w.t, w.f_inj)[0] * np.exp(-1j * omega * w.delays[0])
             + fundamental(cross, w.t, w.f_inj)[0])
    i_inj = w.injection_amplitude * np.exp(1j * (config.injection_phases[0] + w.injection_errors[0]))
    phi0 = wrap_angle(float(np.angle(i_inj) - np.angle(i_osc)))
    psi = wrap_angle(float(np.angle(i_osc + i_inj) - np.angle(i_osc)))
    return LockGeometry(k_eff=float(abs(i_inj) / abs(i_osc)), phi0=phi0, psi=psi, i_osc=float(abs(i_osc)))


def perturbation(n_stages: int, theta: float, mode: str = 'differential') -> List[float]:
    """Injection errors for an error theta on node 0."""
    errors = [0.0] * n_stages
    if mode == 'differential':
        errors[0] += theta / n_stages
        errors[1] -= theta / n_stages
    elif mode == 'single':
        errors[0] += theta
    else:
        raise ConfigurationError('mode', f"must be one of {PERTURBATION_MODES}", mode)
    return errors


def quadrature_error(reading: PhaseReading, n_stages: int) -> float:
    """Deviation of the node 0 to node 1 spacing from pi/N."""
    return wrap_angle(reading.node_phases[0] - reading.node_phases[1] + math.pi / n_stages)


def simulate_quadrature_errors(config: OscillatorConfig, settings: SimSettings,
                               theta_grid: Sequence[float] = DEFAULT_THETA_GRID, mode: str = 'differential',
                               batch: Optional[int] = None) -> List[QuadraturePoint]:
    grid = [float(theta) for theta in theta_grid]
    if not grid:
        raise ConfigurationError('theta_grid', 'must not be empty')
    reference = locked_reference(config)
    size = batch or ilro_settings.SIM_BATCH
    points: List[QuadraturePoint] = []
    for start in range(0, len(grid), size):
        chunk = grid[start:start + size]
        runs = simulate_batch([config] * len(chunk), settings,
                              [perturbation(config.n_stages, theta, mode) for theta in chunk], reference=reference)
        for theta, w in zip(chunk, runs):
            reading = extract_phases(w, settings)
            points.append(QuadraturePoint(theta=theta, quadrature_error=quadrature_error(reading, config.n_stages),
                                          locked=detect_lock(reading, settings), drift_rate=reading.drift_rate,
                                          reading=reading, geometry=measure_lock_geometry(config, w, settings)))
    return points


def fit_slope(points: Sequence[QuadraturePoint]) -> tuple:
    """Least-squares (slope, intercept) of quadrature error against theta."""
    theta = np.array([p.theta for p in points])
    error = np.array([p.quadrature_error for p in points])
    design = np.vstack([theta, np.ones_like(theta)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, error, rcond=None)
    return float(slope), float(intercept)


def measure_sensitivity_sim(config: OscillatorConfig, settings: SimSettings,
                            theta_grid: Sequence[float] = DEFAULT_THETA_GRID, mode: str = 'differential',
                            batch: Optional[int] = None) -> float:
    if len(theta_grid) < 2:
        raise ConfigurationError('theta_grid', 'needs at least two points for a slope', len(theta_grid))
    points = simulate_quadrature_errors(config, settings, theta_grid, mode, batch)
    failures = [p.theta for p in points if not p.locked]
    if failures:
        raise PartialResultError(failures, 'time-domain runs did not lock at theta')
    slope, intercept = fit_slope(points)
    logger.debug("simulated sensitivity %.6g (intercept %.3e rad)", slope, intercept)
    return slope


def write_waveforms(w: Waveforms, path: Path, digits: Optional[int] = None) -> Path:
    digits = digits or ilro_settings.WAVEFORM_DIGITS
    path = Path(path)
    header = ','.join(['t'] + [f"node{i}{suffix}" for i in range(w.config.n_stages) for suffix in ('', 'b')])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, np.column_stack([w.t, w.differential().T]), fmt=f"%.{digits}g", delimiter=',',
                   header=header, comments='', newline='\n')
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    return path


__all__ = (
    'LOCK_PHASE_BUDGET',
    'DEFAULT_THETA_GRID',
    'PERTURBATION_MODES',
    'fundamental',
    'extract_phases',
    'detect_lock',
    'zero_crossings',
    'measure_free_running',
    'measure_lock_geometry',
    'perturbation',
    'quadrature_error',
    'simulate_quadrature_errors',
    'fit_slope',
    'measure_sensitivity_sim',
    'write_waveforms',
)
