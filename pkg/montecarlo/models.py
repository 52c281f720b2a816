import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

from ilro.exceptions import ConfigurationError

MAX_SIGMA: float = 0.2
ERROR_METRIC: str = 'worst-node deviation from ideal pi/N spacing, common mode removed, signed, degrees'


class StudyMode(str, Enum):
    TIME_DOMAIN = 'time-domain'
    PHASOR = 'phasor'


@dataclass(frozen=True)
class MismatchSpec:
    sigma_r: float = 0.01
    sigma_c: float = 0.01
    sigma_gm: float = 0.01
    n_samples: int = 200
    seed: int = 0

    def __post_init__(self):
        for name in ('sigma_r', 'sigma_c', 'sigma_gm'):
            value = getattr(self, name)
            if not math.isfinite(value) or not 0.0 <= value <= MAX_SIGMA:
                raise ConfigurationError(name, f"must lie in [0, {MAX_SIGMA}]", value)
        if isinstance(self.n_samples, bool) or not isinstance(self.n_samples, int) or self.n_samples < 2:
            raise ConfigurationError('n_samples', 'must be an integer >= 2', self.n_samples)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError('seed', 'must be an unsigned 64-bit integer', self.seed)

    @property
    def sigmas(self) -> Tuple[float, float, float]:
        return self.sigma_r, self.sigma_c, self.sigma_gm


@dataclass(frozen=True)
class StageDelta:
    r_load: float = 0.0
    c_load: float = 0.0
    gm_peak: float = 0.0


@dataclass(frozen=True)
class MismatchStudy:
    k_grid: Tuple[float, ...]
    per_k_sigma: Tuple[float, ...]
    per_k_samples: Tuple[Tuple[float, ...], ...]
    n_locked: Tuple[int, ...]
    n_unlocked: Tuple[int, ...]
    mode: StudyMode = StudyMode.TIME_DOMAIN
    sample_index: Tuple[Tuple[int, ...], ...] = field(default_factory=tuple)
    metric: str = ERROR_METRIC

    def __post_init__(self):
        if not len(self.k_grid) == len(self.per_k_sigma) == len(self.per_k_samples):
            raise ConfigurationError('per_k_sigma', 'must align with k_grid')

    def standard_error(self, position: int) -> float:
        """Standard error of the sigma estimate at one k."""
        return self.per_k_sigma[position] / math.sqrt(2.0 * max(self.n_locked[position] - 1, 1))


__all__ = (
    'MAX_SIGMA',
    'ERROR_METRIC',
    'StudyMode',
    'MismatchSpec',
    'StageDelta',
    'MismatchStudy',
)
