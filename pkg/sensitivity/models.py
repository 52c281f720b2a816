import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from ilro.exceptions import ConfigurationError


class SweepAxis(str, Enum):
    PHI0 = 'phi0'
    F_FR = 'f_fr'
    THETA = 'theta'


@dataclass(frozen=True)
class ErrorPerturbation:
    theta: float
    n_stages: int
    alpha: float

    @property
    def quadrature_error(self) -> float:
        return 2.0 * self.alpha


@dataclass(frozen=True)
class SensitivityResult:
    implicit: float
    closed_form: float
    closed_form_rederived: float
    approx: float
    oracle: Optional[float] = None

    @property
    def oracle_matching(self) -> float:
        """The closed form nearer the finite difference of the implicit solve."""
        if abs(self.closed_form_rederived - self.implicit) <= abs(self.closed_form - self.implicit):
            return self.closed_form_rederived
        return self.closed_form


@dataclass(frozen=True)
class SweepRow:
    axis: SweepAxis
    value: float
    locked: bool
    f_fr: float
    k_inj: float
    phi0: float = math.nan
    psi: float = math.nan
    sensitivity: Optional[SensitivityResult] = None
    quadrature_error: float = math.nan

    def __post_init__(self):
        if self.locked and self.sensitivity is None:
            raise ConfigurationError('sensitivity', 'a locked row carries its estimators')


@dataclass(frozen=True)
class ZeroSensitivityResult:
    k_inj: float
    f_inj: float
    locking_range: Tuple[float, float]
    crossings: Tuple[float, ...] = ()
    f_opt: Optional[float] = None

    @property
    def found(self) -> bool:
        return bool(self.crossings)

    @property
    def above_injection(self) -> bool:
        return self.f_opt is not None and self.f_opt > self.f_inj


__all__ = (
    'SweepAxis',
    'ErrorPerturbation',
    'SensitivityResult',
    'SweepRow',
    'ZeroSensitivityResult',
)
