import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ilro.exceptions import ConfigurationError
from montecarlo.models import MismatchSpec, StudyMode
from phasor.models import OscillatorConfig
from timedomain.measurements import DEFAULT_THETA_GRID, PERTURBATION_MODES
from timedomain.models import SimSettings


class Experiment(str, Enum):
    LOCK = 'lock'
    SENSITIVITY_VS_THETA = 'sensitivity-vs-theta'
    SENSITIVITY_VS_PHI0 = 'sensitivity-vs-phi0'
    SENSITIVITY_VS_FFR = 'sensitivity-vs-ffr'
    ZERO_SENSITIVITY = 'zero-sensitivity'
    MONTE_CARLO = 'monte-carlo'
    SIMULATE = 'simulate'


@dataclass(frozen=True)
class SweepSettings:
    """
    Grids shared by the sweep experiments, in radians and hertz. An empty
    grid means the module default for that axis.
    """
    k_grid: Tuple[float, ...]
    phi0_grid: Tuple[float, ...] = ()
    theta_grid: Tuple[float, ...] = ()
    f_fr_grid: Tuple[float, ...] = ()
    oracle_theta_grid: Tuple[float, ...] = DEFAULT_THETA_GRID
    step: float = 1e-6
    perturbation: str = 'differential'
    study_mode: StudyMode = StudyMode.TIME_DOMAIN

    def __post_init__(self):
        for name in ('k_grid', 'phi0_grid', 'theta_grid', 'f_fr_grid', 'oracle_theta_grid'):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.k_grid:
            raise ConfigurationError('k_grid', 'must not be empty')
        for k in self.k_grid:
            if not math.isfinite(k) or not 0.0 <= k < 1.0:
                raise ConfigurationError('k_grid', 'every entry must satisfy 0 <= k_inj < 1', k)
        if self.perturbation not in PERTURBATION_MODES:
            raise ConfigurationError('perturbation', f"must be one of {', '.join(PERTURBATION_MODES)}",
                                     self.perturbation)
        object.__setattr__(self, 'study_mode', StudyMode(self.study_mode))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    oscillator: OscillatorConfig
    sim: SimSettings
    sweep: SweepSettings
    mismatch: Optional[MismatchSpec] = None
    output_dir: Path = Path('results')
    include_oracle: bool = False
    jobs: Optional[int] = None
    # boundary-unit echo of every resolved field, written to metadata.json
    resolved: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def seed(self) -> Optional[int]:
        return None if self.mismatch is None else self.mismatch.seed


@dataclass(frozen=True)
class ArtifactSet:
    experiment: Experiment
    output_dir: Path
    files: Tuple[Path, ...]
    metadata: Path
    elapsed: float


__all__ = (
    'Experiment',
    'SweepSettings',
    'ExperimentConfig',
    'ArtifactSet',
)
