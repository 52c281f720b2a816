import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ilro.exceptions import ConfigurationError
from phasor.models import OscillatorConfig

MIN_SAMPLES_PER_PERIOD: int = 200
MIN_MEASURE_PERIODS: int = 64


@dataclass(frozen=True)
class SimSettings:
    """
    v_init holds either one value per true node (each complement starts at
    the negated value) or the true nodes followed by their complements.
    """
    dt: float
    settle_periods: int = 200
    measure_periods: int = 512
    v_init: Tuple[float, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.dt) or self.dt <= 0.0:
            raise ConfigurationError('dt', 'must be finite and > 0', self.dt)
        if isinstance(self.settle_periods, bool) or not isinstance(self.settle_periods, int) \
                or self.settle_periods < 0:
            raise ConfigurationError('settle_periods', 'must be an integer >= 0', self.settle_periods)
        if isinstance(self.measure_periods, bool) or not isinstance(self.measure_periods, int) \
                or self.measure_periods < MIN_MEASURE_PERIODS:
            raise ConfigurationError('measure_periods', f"must be an integer >= {MIN_MEASURE_PERIODS}",
                                     self.measure_periods)
        object.__setattr__(self, 'v_init', tuple(float(v) for v in self.v_init))
        if self.v_init and not any(self.v_init):
            raise ConfigurationError('v_init', 'the all-zero state is a fixed point of the ring')

    @classmethod
    def for_frequency(cls, f_inj: float, samples_per_period: int = MIN_SAMPLES_PER_PERIOD, **kwargs) -> 'SimSettings':
        return cls(dt=1.0 / (samples_per_period * f_inj), **kwargs)

    def samples_per_period(self, f_inj: float) -> int:
        """Whole number of steps per injection period, or ConfigurationError."""
        exact = 1.0 / (f_inj * self.dt)
        count = int(round(exact))
        if count < MIN_SAMPLES_PER_PERIOD:
            raise ConfigurationError('dt', f"needs at least {MIN_SAMPLES_PER_PERIOD} steps per injection period",
                                     self.dt)
        if abs(exact - count) > 1e-6 * count:
            raise ConfigurationError('dt', 'must divide the injection period into a whole number of steps', self.dt)
        return count

    def window(self, f_inj: float) -> float:
        return self.measure_periods / f_inj


@dataclass(frozen=True)
class Waveforms:
    t: np.ndarray
    nodes: np.ndarray
    f_inj: float
    dt: float
    config: OscillatorConfig
    a_ref: float
    injection_amplitude: float
    injection_errors: Tuple[float, ...]
    delays: Tuple[float, ...]
    complements: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.t.shape[0]:
            raise ConfigurationError('nodes', 'every node series must match the time grid')
        if self.nodes.shape[0] != self.config.n_stages:
            raise ConfigurationError('nodes', f"expected {self.config.n_stages} node series", self.nodes.shape[0])
        if self.complements is not None and self.complements.shape != self.nodes.shape:
            raise ConfigurationError('complements', 'must match the node series', self.complements.shape)

    @property
    def n_samples(self) -> int:
        return int(self.t.shape[0])

    @property
    def reference_phase(self) -> float:
        return self.config.injection_phases[0]

    @property
    def complement_nodes(self) -> np.ndarray:
        """The b side of every pair; an exact mirror when no complement was recorded."""
        return -self.nodes if self.complements is None else self.complements

    def pair_voltages(self) -> np.ndarray:
        return self.nodes - self.complement_nodes

    def differential(self) -> np.ndarray:
        """Series in node0, node0b, node1, node1b, ... order."""
        pairs = np.empty((2 * self.nodes.shape[0], self.nodes.shape[1]))
        pairs[0::2] = self.nodes
        pairs[1::2] = self.complement_nodes
        return pairs


@dataclass(frozen=True)
class PhaseReading:
    node_phases: Tuple[float, ...]
    amplitudes: Tuple[float, ...]
    drift_rate: float
    f_inj: float
    node_drift: Tuple[float, ...] = field(default_factory=tuple)
    complement_offsets: Tuple[float, ...] = field(default_factory=tuple)

    def spacing(self, node: int = 0) -> float:
        """Phase of node+1 ahead of node, in radians."""
        n = len(self.node_phases)
        if node == n - 1:
            return self.node_phases[0] + math.pi - self.node_phases[node]
        return self.node_phases[node + 1] - self.node_phases[node]


@dataclass(frozen=True)
class LockGeometry:
    k_eff: float
    phi0: float
    psi: float
    i_osc: float


@dataclass(frozen=True)
class QuadraturePoint:
    theta: float
    quadrature_error: float
    locked: bool
    drift_rate: float = 0.0
    reading: Optional[PhaseReading] = None
    geometry: Optional[LockGeometry] = None


__all__ = (
    'MIN_SAMPLES_PER_PERIOD',
    'MIN_MEASURE_PERIODS',
    'SimSettings',
    'Waveforms',
    'PhaseReading',
    'LockGeometry',
    'QuadraturePoint',
)
