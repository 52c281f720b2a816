"""
Fixed-step RK4 integration of the behavioural ring.

Every stage is a differential pair whose two outputs are both states, the
true node v_i and its complement vb_i:

    C*dv_i/dt  = -v_i/R  + I_stage,i + I_cross,i + I_inj*cos(w*t + q_i + e_i)
    C*dvb_i/dt = -vb_i/R - I_stage,i - I_cross,i - I_inj*cos(w*t + q_i + e_i)

    I_stage,i = gm_peak*tanh(d_i/(2*v_sat)),   d_i = (v_{i+1} - vb_{i+1})(t - tau)
    I_cross,i = -gm_cross*tanh((vb_i - v_i)/(2*v_sat))

with the crossover d_{N-1} = (vb_0 - v_0)(t - tau). Both currents respond to
pair voltages only, so the common mode of a pair decays through R and the
complement settles 180 degrees from its true node. The delay tau realises
theta_VI at the reference frequency. Runs that share a time grid are
integrated together as one (batch, side, node) array.
"""
import math
from logging import getLogger
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ilro.exceptions import ConfigurationError, InstabilityError
from phasor.models import OscillatorConfig
from phasor.solvers import free_running_frequency, locked_reference
from .models import SimSettings, Waveforms

logger = getLogger(__name__)

DIVERGENCE_FACTOR: float = 100.0
INITIAL_FRACTION: float = 0.1


def _validate_batch(configs: Sequence[OscillatorConfig]) -> None:
    if not configs:
        raise ConfigurationError('configs', 'must not be empty')
    first = configs[0]
    for config in configs:
        if config.n_stages != first.n_stages or config.f_inj != first.f_inj:
            raise ConfigurationError('configs', 'batched runs must share n_stages and f_inj')
        for stage in config.stages:
            if stage.am_pm_coeff != 0.0:
                raise ConfigurationError('am_pm_coeff', 'the time-domain model has no amplitude-to-phase term',
                                         stage.am_pm_coeff)
            if stage.gm_cross / stage.v_sat >= 1.0 / stage.r_load:
                raise ConfigurationError('gm_cross', 'the cross-coupled pair latches when gm_cross/v_sat >= 1/r_load',
                                         stage.gm_cross)


def initial_state(n_stages: int, a_ref: float, settings: SimSettings) -> np.ndarray:
    """(2, N) starting voltages: true nodes, then complements."""
    if settings.v_init:
        values = np.array(settings.v_init, dtype=float)
        if values.shape[0] == n_stages:
            return np.stack([values, -values])
        if values.shape[0] == 2 * n_stages:
            return values.reshape(2, n_stages)
        raise ConfigurationError('v_init', f"must hold {n_stages} or {2 * n_stages} entries", len(settings.v_init))
    values = np.array([INITIAL_FRACTION * a_ref * (1.0 if i % 2 == 0 else -1.0) for i in range(n_stages)])
    return np.stack([values, -values])


def stage_delays(config: OscillatorConfig, f_ref: float, dt: float) -> np.ndarray:
    delays = np.array([stage.theta_vi0 for stage in config.stages]) / (2.0 * math.pi * f_ref)
    if np.any(delays < 0.0):
        raise ConfigurationError('theta_vi0', 'a negative voltage-to-current lag cannot be realised as a delay')
    if np.any((delays > 0.0) & (delays < dt)):
        raise ConfigurationError('theta_vi0', 'the realised delay is shorter than one time step; reduce dt',
                                 float(np.min(delays[delays > 0.0])))
    return delays


def simulate(config: OscillatorConfig, settings: SimSettings, injection_errors: Optional[Sequence[float]] = None,
             **kwargs) -> Waveforms:
    return simulate_batch([config], settings, None if injection_errors is None else [injection_errors], **kwargs)[0]


def simulate_batch(
        configs: Sequence[OscillatorConfig],
        settings: SimSettings,
        injection_errors: Optional[Sequence[Sequence[float]]] = None,
        reference: Optional[Tuple[float, float]] = None,
        f_ref: Optional[float] = None,
) -> List[Waveforms]:
    """
    Integrate every config on the same time grid and return the measurement
    window of each run. reference is the (A_ref, I_osc) pair that sizes the
    injection current (k*I_osc); it defaults to the first config's locked
    operating point from the phasor model.
    """
    configs = list(configs)
    _validate_batch(configs)
    batch, n = len(configs), configs[0].n_stages
    f_inj = configs[0].f_inj
    errors = np.zeros((batch, n)) if injection_errors is None else np.array(injection_errors, dtype=float)
    if errors.shape != (batch, n):
        raise ConfigurationError('injection_errors', f"must hold {n} entries per run", errors.shape)
    a_ref, i_osc = reference if reference is not None else locked_reference(configs[0])

    dt = settings.dt
    spp = settings.samples_per_period(f_inj)
    settle = settings.settle_periods * spp
    measure = settings.measure_periods * spp
    total = settle + measure

    refs = [f_ref if f_ref is not None else (f_inj if c.injection_ratio > 0.0 else free_running_frequency(c))
            for c in configs]
    delays = np.array([stage_delays(c, f, dt) for c, f in zip(configs, refs)])
    r = np.array([[s.r_load for s in c.stages] for c in configs])
    cap = np.array([[s.c_load for s in c.stages] for c in configs])
    gm = np.array([[s.gm_peak for s in c.stages] for c in configs])
    gm_cross = np.array([[s.gm_cross for s in c.stages] for c in configs])
    v_sat = np.array([[s.v_sat for s in c.stages] for c in configs])
    amplitude = np.array([[c.injection_ratio * i_osc] for c in configs])
    phase = np.array([c.injection_phases for c in configs]) + errors
    omega = 2.0 * math.pi * f_inj

    src = np.roll(np.arange(n), -1)
    sign = np.ones(n)
    sign[-1] = -1.0
    rows = np.arange(batch)[:, None]
    cols = np.broadcast_to(src, (batch, n))

    steps = delays / dt
    delayed = steps > 0.0
    undelayed = ~delayed
    any_undelayed = bool(np.any(undelayed))
    length = int(np.ceil(steps.max())) + 3
    taps = []
    for s in (0.0, 0.5, 1.0):
        position = s - steps
        base = np.floor(position).astype(int)
        taps.append((base, position - base))

    v = np.broadcast_to(initial_state(n, a_ref, settings), (batch, 2, n)).copy()
    history = np.broadcast_to(v[:, 0] - v[:, 1], (length, batch, n)).copy()
    record = np.empty((measure, batch, 2, n))
    limit = DIVERGENCE_FACTOR * a_ref
    logger.debug("integrating %d run(s) of %d stages: %d steps, delay %.3f steps", batch, n, total, steps.max())

    def stage_input(n_step: int, tap: int, state: np.ndarray) -> np.ndarray:
        base, frac = taps[tap]
        slot = n_step + base
        d = (1.0 - frac) * history[slot % length, rows, cols] + frac * history[(slot + 1) % length, rows, cols]
        d = sign * d
        if any_undelayed:
            d = np.where(undelayed, sign * (state[:, 0] - state[:, 1])[:, src], d)
        return d

    def derivative(t: float, state: np.ndarray, d: np.ndarray) -> np.ndarray:
        true, complement = state[:, 0], state[:, 1]
        drive = amplitude * np.cos(omega * t + phase)
        stage = gm * np.tanh(d / (2.0 * v_sat))
        cross = -gm_cross * np.tanh((complement - true) / (2.0 * v_sat))
        current = stage + cross + drive
        return np.stack([(-true / r + current) / cap, (-complement / r - current) / cap], axis=1)

    half = 0.5 * dt
    for step in range(total):
        history[step % length] = v[:, 0] - v[:, 1]
        if step >= settle:
            record[step - settle] = v
        if step % spp == 0 and (not np.all(np.isfinite(v)) or np.max(np.abs(v)) > limit):
            b, side, i = np.argwhere(~np.isfinite(v) | (np.abs(v) > limit))[0]
            raise InstabilityError(node=f"{i}{'b' if side else ''}", time=step * dt, value=float(v[b, side, i]))
        t = step * dt
        k1 = derivative(t, v, stage_input(step, 0, v))
        s2 = v + half * k1
        k2 = derivative(t + half, s2, stage_input(step, 1, s2))
        s3 = v + half * k2
        k3 = derivative(t + half, s3, stage_input(step, 1, s3))
        s4 = v + dt * k3
        k4 = derivative(t + dt, s4, stage_input(step, 2, s4))
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    t = (settle + np.arange(measure)) * dt
    return [
        Waveforms(
            t=t,
            nodes=np.ascontiguousarray(record[:, b, 0, :].T),
            f_inj=f_inj,
            dt=dt,
            config=configs[b],
            a_ref=a_ref,
            injection_amplitude=float(amplitude[b, 0]),
            injection_errors=tuple(float(e) for e in errors[b]),
            delays=tuple(float(d) for d in delays[b]),
            complements=np.ascontiguousarray(record[:, b, 1, :].T),
        )
        for b in range(batch)
    ]


__all__ = (
    'DIVERGENCE_FACTOR',
    'initial_state',
    'stage_delays',
    'simulate',
    'simulate_batch',
)
