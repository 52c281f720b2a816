import cmath
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from ilro.exceptions import ConfigurationError
from .utils import wrap_angle


@dataclass(frozen=True)
class Phasor:
    magnitude: float
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.magnitude) or self.magnitude < 0.0:
            raise ConfigurationError('magnitude', 'must be finite and >= 0', self.magnitude)
        if not math.isfinite(self.angle):
            raise ConfigurationError('angle', 'must be finite', self.angle)
        object.__setattr__(self, 'angle', wrap_angle(self.angle))

    @classmethod
    def from_complex(cls, value: complex) -> 'Phasor':
        return cls(magnitude=abs(value), angle=cmath.phase(value))

    def to_complex(self) -> complex:
        return cmath.rect(self.magnitude, self.angle)

    def __add__(self, other: 'Phasor') -> 'Phasor':
        return Phasor.from_complex(self.to_complex() + other.to_complex())

    def rotate(self, angle: float) -> 'Phasor':
        return Phasor(magnitude=self.magnitude, angle=self.angle + angle)

    def scale(self, factor: float) -> 'Phasor':
        return Phasor(magnitude=self.magnitude * abs(factor), angle=self.angle + (math.pi if factor < 0 else 0.0))

    def angle_to(self, reference: 'Phasor') -> float:
        return wrap_angle(self.angle - reference.angle)


@dataclass(frozen=True)
class StageModel:
    """
    One differential stage. gm_cross is its cross-coupled pair: the phasor
    model lumps that current into gm_peak and theta_vi0, and only the
    time-domain simulator integrates it separately.
    """
    r_load: float = 1.0e3
    c_load: float = 1.0 / (2.0 * math.pi * 1.0e3 * 7.0e9)
    gm_peak: float = 0.4e-3
    theta_vi0: float = 0.0
    am_pm_coeff: float = 0.0
    v_sat: float = 0.2
    gm_cross: float = 0.0

    def __post_init__(self):
        for name in ('r_load', 'c_load', 'gm_peak', 'v_sat'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ConfigurationError(name, 'must be finite and > 0', value)
        for name in ('theta_vi0', 'am_pm_coeff'):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigurationError(name, 'must be finite', value)
        if not math.isfinite(self.gm_cross) or self.gm_cross < 0.0:
            raise ConfigurationError('gm_cross', 'must be finite and >= 0', self.gm_cross)
        if not math.isfinite(self.f_3db):
            raise ConfigurationError('c_load', 'r_load*c_load gives a non-finite 3 dB frequency', self.c_load)

    @property
    def f_3db(self) -> float:
        return 1.0 / (2.0 * math.pi * self.r_load * self.c_load)

    @property
    def gm_small_signal(self) -> float:
        return self.gm_peak / self.v_sat

    def impedance(self, f: float) -> complex:
        return self.r_load / complex(1.0, f / self.f_3db)


def nominal_injection_phases(n_stages: int) -> Tuple[float, ...]:
    return tuple(i * math.pi / n_stages for i in range(n_stages))


@dataclass(frozen=True)
class OscillatorConfig:
    n_stages: int
    stages: Tuple[StageModel, ...]
    injection_ratio: float
    f_inj: float
    injection_phases: Tuple[float, ...] = ()

    def __post_init__(self):
        if isinstance(self.n_stages, bool) or not isinstance(self.n_stages, int) or self.n_stages < 2:
            raise ConfigurationError('n_stages', 'must be an integer >= 2', self.n_stages)
        object.__setattr__(self, 'stages', tuple(self.stages))
        if len(self.stages) != self.n_stages:
            raise ConfigurationError('stages', f"must hold exactly {self.n_stages} entries", len(self.stages))
        if not math.isfinite(self.injection_ratio) or not 0.0 <= self.injection_ratio < 1.0:
            raise ConfigurationError('injection_ratio', 'must satisfy 0 <= k_inj < 1', self.injection_ratio)
        if not math.isfinite(self.f_inj) or self.f_inj <= 0.0:
            raise ConfigurationError('f_inj', 'must be finite and > 0', self.f_inj)
        phases = tuple(self.injection_phases) or nominal_injection_phases(self.n_stages)
        if len(phases) != self.n_stages:
            raise ConfigurationError('injection_phases', f"must hold exactly {self.n_stages} entries", len(phases))
        step = math.pi / self.n_stages
        for i in range(1, self.n_stages):
            if abs(wrap_angle(phases[i] - phases[i - 1] - step)) > 1e-9:
                raise ConfigurationError('injection_phases', 'nominal phases must be spaced by pi/N')
        object.__setattr__(self, 'injection_phases', phases)

    @classmethod
    def uniform(cls, n_stages: int, stage: StageModel, injection_ratio: float, f_inj: float,
                phase_offset: float = 0.0) -> 'OscillatorConfig':
        return cls(
            n_stages=n_stages,
            stages=(stage,) * n_stages,
            injection_ratio=injection_ratio,
            f_inj=f_inj,
            injection_phases=tuple(phase_offset + p for p in nominal_injection_phases(n_stages)),
        )

    @property
    def identical_stages(self) -> bool:
        return all(stage == self.stages[0] for stage in self.stages)

    @property
    def excess_lag(self) -> float:
        """Per-stage lag beyond the inversion in the fundamental ring mode."""
        return math.pi / self.n_stages

    def replace(self, **changes) -> 'OscillatorConfig':
        return replace(self, **changes)


@dataclass(frozen=True)
class LockState:
    f_fr: float
    f_inj: float
    k_inj: float
    locked: bool
    phi0: Optional[float] = None
    psi: Optional[float] = None
    node_phasors: Tuple[Phasor, ...] = ()
    required_psi: float = math.nan

    def __post_init__(self):
        if self.locked and (self.phi0 is None or self.psi is None):
            raise ConfigurationError('phi0', 'a locked state needs phi0 and psi')
        if not self.locked and (self.phi0 is not None or self.psi is not None):
            raise ConfigurationError('phi0', 'an unlocked state carries no phi0/psi')
        if self.phi0 is not None:
            object.__setattr__(self, 'phi0', wrap_angle(self.phi0))
        if self.psi is not None:
            object.__setattr__(self, 'psi', wrap_angle(self.psi))
        object.__setattr__(self, 'node_phasors', tuple(self.node_phasors))

    @property
    def detuning(self) -> float:
        return self.f_inj - self.f_fr


@dataclass(frozen=True)
class NetworkSolution:
    locked: bool
    node_phasors: Tuple[Phasor, ...]
    phi: Tuple[float, ...]
    psi: Tuple[float, ...]
    residual: float
    message: str = ''
    stable: Tuple[bool, ...] = field(default_factory=tuple)

    def spacing_errors(self) -> List[float]:
        n = len(self.node_phasors)
        step = math.pi / n
        offsets = [wrap_angle(p.angle - i * step) for i, p in enumerate(self.node_phasors)]
        common = math.atan2(sum(math.sin(o) for o in offsets), sum(math.cos(o) for o in offsets))
        return [wrap_angle(o - common) for o in offsets]


__all__ = (
    'Phasor',
    'StageModel',
    'OscillatorConfig',
    'LockState',
    'NetworkSolution',
    'nominal_injection_phases',
)
