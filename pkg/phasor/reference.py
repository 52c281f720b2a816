"""
Reference ring configurations: a 1 kOhm / 7 GHz-pole stage with a tanh
transconductor, injected at 7 GHz.
"""
import math

from .models import OscillatorConfig, StageModel
from .solvers import with_free_running_frequency

REFERENCE_F_INJ: float = 7.0e9
REFERENCE_AM_PM: float = -2.5


def reference_stage(n_stages: int, am_pm_coeff: float = 0.0) -> StageModel:
    # theta_VI tops up the RC lag so a ring of up to four stages runs at the pole frequency
    return StageModel(theta_vi0=max(math.pi / n_stages - math.pi / 4.0, 0.0), am_pm_coeff=am_pm_coeff)


def reference_config(n_stages: int = 2, k_inj: float = 0.1, f_inj: float = REFERENCE_F_INJ) -> OscillatorConfig:
    config = OscillatorConfig.uniform(n_stages, reference_stage(n_stages), k_inj, f_inj)
    if n_stages > 4:
        config = with_free_running_frequency(config, f_inj)
    return config


def am_pm_reference_config(k_inj: float = 0.1, n_stages: int = 2, f_inj: float = REFERENCE_F_INJ,
                           am_pm_coeff: float = REFERENCE_AM_PM) -> OscillatorConfig:
    config = OscillatorConfig.uniform(n_stages, reference_stage(n_stages, am_pm_coeff), k_inj, f_inj)
    if n_stages > 4:
        config = with_free_running_frequency(config, f_inj)
    return config


__all__ = (
    'REFERENCE_F_INJ',
    'REFERENCE_AM_PM',
    'reference_stage',
    'reference_config',
    'am_pm_reference_config',
)
