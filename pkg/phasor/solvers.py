"""
Phasor model of an N-stage differential ring oscillator under symmetric
multi-phase injection.

Node i of the ring is driven by node i+1 and node N-1 by the complement of
node 0, so node phases advance by pi/N along the index and the ideal
injection phase of node i is i*pi/N. Each stage inverts; the inversion is
absorbed by taking the stage output at the polarity that keeps that ordering,
which leaves the ring crossover as the only explicit inversion.
"""
import cmath
import math
from dataclasses import replace
from logging import getLogger
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from ilro.exceptions import ConfigurationError, NoOscillationError, NumericalError, StartupError
from .models import LockState, NetworkSolution, OscillatorConfig, Phasor, StageModel
from .utils import bisect_boundary, require_finite, safeguarded_newton, wrap_angle

logger = getLogger(__name__)

ROOT_GRID: int = 721
LOCK_TOL: float = 1e-12


def stage_lag(f: float, stage: StageModel, amplitude_ratio: float = 1.0) -> float:
    return stage.theta_vi0 + stage.am_pm_coeff * (amplitude_ratio - 1.0) + math.atan(f / stage.f_3db)


def stage_phase_response(f: float, stage: StageModel, amplitude_ratio: float = 1.0) -> float:
    require_finite(f=f, amplitude_ratio=amplitude_ratio)
    if f <= 0.0:
        raise ConfigurationError('f', 'must be > 0', f)
    if amplitude_ratio <= 0.0:
        raise ConfigurationError('amplitude_ratio', 'must be > 0', amplitude_ratio)
    return wrap_angle(math.pi - stage_lag(f, stage, amplitude_ratio))


def loop_phase_residual(f: float, config: OscillatorConfig) -> float:
    return math.pi - sum(stage_lag(f, stage) for stage in config.stages)


def free_running_frequency(config: OscillatorConfig) -> float:
    f_3db = min(stage.f_3db for stage in config.stages)
    lo, hi = 1e-9 * f_3db, 100.0 * f_3db
    r_lo, r_hi = loop_phase_residual(lo, config), loop_phase_residual(hi, config)
    if r_lo * r_hi > 0.0:
        raise NoOscillationError(
            f"loop phase never reaches the oscillation condition in (0, {hi:.4g}) Hz "
            f"(residual {r_lo:.4g} .. {r_hi:.4g} rad)"
        )
    f_fr = optimize.brentq(loop_phase_residual, lo, hi, args=(config,), xtol=1e-6, rtol=4 * np.finfo(float).eps,
                           maxiter=200)
    logger.debug("free-running frequency %.9e Hz (residual %.3e rad)", f_fr, loop_phase_residual(f_fr, config))
    return f_fr


def psi_from_geometry(k_inj: float, phi0: float) -> float:
    if not 0.0 <= k_inj < 1.0:
        raise ConfigurationError('k_inj', 'must satisfy 0 <= k_inj < 1', k_inj)
    return math.atan2(k_inj * math.sin(phi0), 1.0 + k_inj * math.cos(phi0))


def psi_slope(k_inj: float, phi0: float) -> float:
    c = math.cos(phi0)
    return k_inj * (k_inj + c) / (1.0 + 2.0 * k_inj * c + k_inj * k_inj)


def stage_current_fundamental(stage: StageModel, amplitude: float) -> float:
    """Fundamental of gm_peak*tanh(A*cos(t)/v_sat) (describing function times A)."""
    if amplitude <= 0.0:
        return 0.0
    value, _ = integrate.quad(lambda t: math.tanh(amplitude * math.cos(t) / stage.v_sat) * math.cos(t), 0.0, math.pi)
    return 2.0 * stage.gm_peak * value / math.pi


def _balanced_amplitude(stage: StageModel, gain: float) -> Tuple[float, float]:
    """Amplitude A with A = gain*I(A), and I(A)."""
    if stage.gm_small_signal * gain <= 1.0:
        raise StartupError(
            f"small-signal loop gain {stage.gm_small_signal * gain:.3f} <= 1: the ring cannot start"
        )

    def balance(a: float) -> float:
        return stage_current_fundamental(stage, a) * gain - a

    hi = 4.0 / math.pi * stage.gm_peak * gain + stage.v_sat
    amplitude = optimize.brentq(balance, 1e-9 * stage.v_sat, hi, xtol=1e-15, maxiter=200)
    return amplitude, stage_current_fundamental(stage, amplitude)


def reference_amplitude(config: OscillatorConfig, f_fr: Optional[float] = None) -> Tuple[float, float]:
    stage = config.stages[0]
    f_fr = free_running_frequency(config) if f_fr is None else f_fr
    return _balanced_amplitude(stage, abs(stage.impedance(f_fr)))


def with_free_running_frequency(config: OscillatorConfig, f_fr: float) -> OscillatorConfig:
    if not math.isfinite(f_fr) or f_fr <= 0.0:
        raise ConfigurationError('f_fr', 'must be finite and > 0', f_fr)
    factor = free_running_frequency(config) / f_fr
    return config.replace(stages=tuple(replace(stage, c_load=stage.c_load * factor) for stage in config.stages))


def with_injection(config: OscillatorConfig, k_inj: Optional[float] = None, f_inj: Optional[float] = None
                   ) -> OscillatorConfig:
    changes = {}
    if k_inj is not None:
        changes['injection_ratio'] = k_inj
    if f_inj is not None:
        changes['f_inj'] = f_inj
    return config.replace(**changes)


def _require_identical(config: OscillatorConfig) -> StageModel:
    if not config.identical_stages:
        raise ConfigurationError('stages', 'the symmetric lock solve needs identical stages; use solve_network')
    return config.stages[0]


def amplitude_ratio(config: OscillatorConfig, f_fr: float, phi0: float) -> float:
    stage = config.stages[0]
    rho = abs(stage.impedance(config.f_inj)) / abs(stage.impedance(f_fr))
    return rho * abs(1.0 + config.injection_ratio * cmath.exp(1j * phi0))


def lock_residual(config: OscillatorConfig, f_fr: float) -> Tuple[Callable[[float], float], Callable[[float], float]]:
    """
    g(phi0) = stage response at f_inj + psi(phi0) - (pi - pi/N), and dg/dphi0.
    The stable branch is dg/dphi0 > 0.
    """
    stage = _require_identical(config)
    k = config.injection_ratio
    n = config.n_stages
    rho = abs(stage.impedance(config.f_inj)) / abs(stage.impedance(f_fr))
    rc_lag = math.atan(config.f_inj / stage.f_3db)
    c = stage.am_pm_coeff

    def g(phi: float) -> float:
        ratio = rho * abs(1.0 + k * cmath.exp(1j * phi))
        lag = stage.theta_vi0 + c * (ratio - 1.0) + rc_lag
        return math.pi / n - lag + psi_from_geometry(k, phi)

    def dg(phi: float) -> float:
        magnitude = abs(1.0 + k * cmath.exp(1j * phi))
        d_ratio = -rho * k * math.sin(phi) / magnitude
        return -c * d_ratio + psi_slope(k, phi)

    return g, dg


def _roots_on_circle(g: Callable[[float], float], dg: Callable[[float], float]) -> List[float]:
    grid = list(np.linspace(-math.pi, math.pi, ROOT_GRID))
    slopes = [dg(x) for x in grid]
    extrema = []
    for (a, sa), (b, sb) in zip(zip(grid, slopes), zip(grid[1:], slopes[1:])):
        if sa == 0.0:
            extrema.append(a)
        elif sa * sb < 0.0:
            extrema.append(optimize.brentq(dg, a, b, xtol=1e-15))
    points = sorted(set(grid + extrema))
    values = [g(x) for x in points]

    roots = []
    for (a, ga), (b, gb) in zip(zip(points, values), zip(points[1:], values[1:])):
        if abs(ga) <= LOCK_TOL:
            roots.append(a)
        elif ga * gb < 0.0:
            roots.append(safeguarded_newton(g, dg, a, b, tol=LOCK_TOL))
    if abs(values[-1]) <= LOCK_TOL:
        roots.append(points[-1])

    unique: List[float] = []
    for root in sorted(wrap_angle(r) for r in roots):
        if not unique or abs(wrap_angle(root - unique[-1])) > 1e-9:
            unique.append(root)
    if len(unique) > 1 and abs(wrap_angle(unique[0] - unique[-1])) <= 1e-9:
        unique.pop()
    return unique


def lock_node_phasors(config: OscillatorConfig, f_fr: float, phi0: float, psi: float,
                  reference: Optional[Tuple[float, float]] = None) -> Tuple[Phasor, ...]:
    stage = config.stages[0]
    _, i_osc = reference if reference is not None else reference_amplitude(config, f_fr)
    k = config.injection_ratio
    magnitude = abs(stage.impedance(config.f_inj)) * i_osc * abs(1.0 + k * cmath.exp(1j * phi0))
    p0 = -phi0 + psi - math.atan(config.f_inj / stage.f_3db)
    step = math.pi / config.n_stages
    return tuple(Phasor(magnitude=magnitude, angle=p0 + i * step) for i in range(config.n_stages))


def solve_lock_state(config: OscillatorConfig, f_fr: Optional[float] = None,
                     reference: Optional[Tuple[float, float]] = None, phasors: bool = True) -> LockState:
    """
    Stable lock point of an identical-stage ring, nearest phi0 = 0.

    required_psi is the phase the injection must supply: the stage lag at
    f_inj minus pi/N. With an amplitude-to-phase coefficient it includes the
    lag shift at the locked amplitude, so psi == required_psi for every locked
    state; unlocked states report it at the free-running amplitude.
    """
    stage = _require_identical(config)
    f_fr = free_running_frequency(config) if f_fr is None else f_fr
    k = config.injection_ratio
    required = stage.theta_vi0 + math.atan(config.f_inj / stage.f_3db) - config.excess_lag
    base = dict(f_fr=f_fr, f_inj=config.f_inj, k_inj=k, required_psi=required)

    if k == 0.0:
        if abs(required) > LOCK_TOL:
            return LockState(locked=False, **base)
        nodes = lock_node_phasors(config, f_fr, 0.0, 0.0, reference) if phasors else ()
        return LockState(locked=True, phi0=0.0, psi=0.0, node_phasors=nodes, **base)

    g, dg = lock_residual(config, f_fr)
    roots = _roots_on_circle(g, dg)
    stable = [r for r in roots if dg(r) > -1e-9]
    logger.debug("lock solve at f_fr=%.6e: roots %s, stable %s", f_fr, roots, stable)
    if not stable:
        return LockState(locked=False, **base)

    candidates = [r for r in stable if dg(r) > 0.0] or stable
    phi0 = min(candidates, key=abs)
    residual = g(phi0)
    if abs(residual) > 1e-9:
        raise NumericalError(f"lock solve residual {residual:.3e} rad exceeds tolerance")
    psi = psi_from_geometry(k, phi0)
    if stage.am_pm_coeff != 0.0:
        ratio = abs(stage.impedance(config.f_inj)) / abs(stage.impedance(f_fr)) * abs(1.0 + k * cmath.exp(1j * phi0))
        base['required_psi'] = required + stage.am_pm_coeff * (ratio - 1.0)
    nodes = lock_node_phasors(config, f_fr, phi0, psi, reference) if phasors else ()
    return LockState(locked=True, phi0=phi0, psi=psi, node_phasors=nodes, **base)


def is_locked(config: OscillatorConfig) -> bool:
    return solve_lock_state(config, phasors=False).locked


def locked_reference(config: OscillatorConfig, lock: Optional[LockState] = None) -> Tuple[float, float]:
    """
    (A, I_osc) at the locked operating point: A = |Z(f_inj)|*I(A)*|1 + k*exp(j*phi0)|.
    An injection current of k*I_osc then keeps k the injection-to-oscillator
    current ratio of the locked ring. Rings that do not lock, or run free, get
    the free-running reference.
    """
    k = config.injection_ratio
    if k == 0.0 or not config.identical_stages:
        return reference_amplitude(config)
    lock = lock if lock is not None else solve_lock_state(config, phasors=False)
    if not lock.locked:
        return reference_amplitude(config)
    stage = config.stages[0]
    gain = abs(stage.impedance(config.f_inj)) * abs(1.0 + k * cmath.exp(1j * lock.phi0))
    return _balanced_amplitude(stage, gain)


def _find_locked_point(predicate: Callable[[float], bool], center: float, span: float) -> float:
    if predicate(center):
        return center
    for fraction in np.linspace(-1.0, 1.0, 81):
        candidate = center * (1.0 + fraction * span)
        if candidate > 0.0 and predicate(candidate):
            return candidate
    raise NumericalError(f"no locked operating point found within +/-{span:.0%} of {center:.6e} Hz")


def _range_edges(predicate: Callable[[float], bool], inside: float, step: float, rtol: float) -> Tuple[float, float]:
    edges = []
    for direction in (-1.0, 1.0):
        outside = inside + direction * step
        while predicate(outside):
            step *= 2.0
            outside = inside + direction * step
            if outside <= 0.0:
                raise NumericalError('locking range extends to zero frequency')
        edge, _ = bisect_boundary(predicate, inside, outside, rtol=rtol)
        edges.append(edge)
        step = abs(outside - inside) / 4.0 or step
    return edges[0], edges[1]


def locking_range(config: OscillatorConfig, axis: str = 'f_fr', rtol: float = 1e-9) -> Tuple[float, float]:
    """
    Contiguous interval over which the ring locks: the free-running frequency
    interval at fixed f_inj (axis='f_fr') or the injection frequency interval
    at fixed free-running frequency (axis='f_inj').
    """
    _require_identical(config)
    k = config.injection_ratio
    f_fr = free_running_frequency(config)
    if axis == 'f_fr':
        if k == 0.0:
            return config.f_inj, config.f_inj

        def predicate(f: float) -> bool:
            return solve_lock_state(with_free_running_frequency(config, f), f_fr=f, phasors=False).locked

        center = config.f_inj
    elif axis == 'f_inj':
        if k == 0.0:
            return f_fr, f_fr

        def predicate(f: float) -> bool:
            return solve_lock_state(config.replace(f_inj=f), f_fr=f_fr, phasors=False).locked

        center = f_fr
    else:
        raise ConfigurationError('axis', "must be 'f_fr' or 'f_inj'", axis)

    inside = _find_locked_point(predicate, center, span=2.0 * k)
    lo, hi = _range_edges(predicate, inside, step=0.05 * k * center, rtol=rtol)
    logger.debug("locking range (%s) %.9e .. %.9e Hz", axis, lo, hi)
    return lo, hi


def solve_network(config: OscillatorConfig, injection_errors: Optional[Sequence[float]] = None,
                  reference: Optional[Tuple[float, float]] = None) -> NetworkSolution:
    """
    Full N-node phasor solve at f_inj with arbitrary stages and per-node
    injection errors. Stage currents keep the magnitude they have at the
    reference amplitude (saturated transconductors) and follow the phase of
    their input node delayed by theta_VI.
    """
    n = config.n_stages
    errors = np.zeros(n) if injection_errors is None else np.asarray(injection_errors, dtype=float)
    if errors.shape != (n,):
        raise ConfigurationError('injection_errors', f"must hold exactly {n} entries", len(errors))
    a_ref, i_ref = reference if reference is not None else reference_amplitude(config)
    f = config.f_inj
    z = np.array([stage.impedance(f) for stage in config.stages]) * i_ref / a_ref
    i_osc = np.array([stage_current_fundamental(stage, a_ref) for stage in config.stages]) / i_ref
    theta0 = np.array([stage.theta_vi0 for stage in config.stages])
    am_pm = np.array([stage.am_pm_coeff for stage in config.stages])
    q = np.asarray(config.injection_phases) - config.injection_phases[0] + errors
    i_inj = config.injection_ratio * np.exp(1j * q)

    def currents(v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        v_in = np.append(v[1:], -v[0])
        lag = theta0 + am_pm * (np.abs(v_in) - 1.0)
        osc = i_osc * np.exp(1j * (np.angle(v_in) - lag))
        return osc, osc + i_inj

    def residual(x: np.ndarray) -> np.ndarray:
        v = x[:n] * np.exp(1j * x[n:])
        _, total = currents(v)
        mismatch = v - z * total
        return np.concatenate([mismatch.real, mismatch.imag])

    if config.identical_stages:
        seed = solve_lock_state(config, reference=(a_ref, i_ref))
    else:
        seed = solve_lock_state(config.replace(stages=(config.stages[0],) * n), reference=(a_ref, i_ref))
    if seed.locked:
        start = np.array([p.magnitude / a_ref for p in seed.node_phasors] + [p.angle for p in seed.node_phasors])
    else:
        p0 = -math.atan(f / config.stages[0].f_3db)
        start = np.array([1.0] * n + [p0 + i * math.pi / n for i in range(n)])

    result = optimize.root(residual, start, method='hybr', options={'xtol': 1e-13})
    x = result.x
    v = x[:n] * np.exp(1j * x[n:])
    worst = float(np.max(np.abs(residual(x))))
    osc, total = currents(v)
    phi = tuple(wrap_angle(a) for a in np.angle(i_inj) - np.angle(osc))
    psi = tuple(wrap_angle(a) for a in np.angle(total) - np.angle(osc))
    k_node = config.injection_ratio / i_osc
    stable = tuple(
        bool(am_pm[i] != 0.0 or psi_slope(float(k_node[i]), phi[i]) > 0.0) for i in range(n)
    )
    locked = bool(result.success) and worst < 1e-9 and all(stable) and bool(np.all(x[:n] > 0.0))
    if not locked:
        logger.debug("network solve not locked: %s (residual %.3e, stable %s)", result.message, worst, stable)
    phasors = tuple(Phasor(magnitude=abs(node) * a_ref, angle=float(np.angle(node))) for node in v)
    return NetworkSolution(locked=locked, node_phasors=phasors, phi=phi, psi=psi, residual=worst,
                           message=str(result.message), stable=stable)


__all__ = (
    'stage_lag',
    'stage_phase_response',
    'loop_phase_residual',
    'free_running_frequency',
    'psi_from_geometry',
    'psi_slope',
    'stage_current_fundamental',
    'reference_amplitude',
    'locked_reference',
    'with_free_running_frequency',
    'with_injection',
    'amplitude_ratio',
    'lock_residual',
    'lock_node_phasors',
    'solve_lock_state',
    'is_locked',
    'locking_range',
    'solve_network',
)
