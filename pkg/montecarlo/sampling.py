from dataclasses import replace
from typing import Sequence, Tuple

import numpy as np

from ilro.exceptions import ConfigurationError
from phasor.models import OscillatorConfig
from .models import MismatchSpec, StageDelta

PARAMETERS: Tuple[str, ...] = ('r_load', 'c_load', 'gm_peak')


def _standard_normal(seed: int, parameter: int, stage: int, index: int) -> float:
    # one Philox block per (seed, index, stage, parameter)
    generator = np.random.Generator(np.random.Philox(key=seed, counter=[0, parameter, stage, index]))
    return float(generator.standard_normal())


def sample_mismatch(spec: MismatchSpec, index: int, n_stages: int) -> Tuple[StageDelta, ...]:
    if not 0 <= index < spec.n_samples:
        raise ConfigurationError('index', f"must lie in [0, {spec.n_samples})", index)
    deltas = []
    for stage in range(n_stages):
        values = {}
        for parameter, (name, sigma) in enumerate(zip(PARAMETERS, spec.sigmas)):
            values[name] = sigma * _standard_normal(spec.seed, parameter, stage, index) if sigma else 0.0
        deltas.append(StageDelta(**values))
    return tuple(deltas)


def apply_mismatch(config: OscillatorConfig, deltas: Sequence[StageDelta]) -> OscillatorConfig:
    if len(deltas) != config.n_stages:
        raise ConfigurationError('deltas', f"must hold exactly {config.n_stages} entries", len(deltas))
    stages = tuple(
        replace(stage, **{name: getattr(stage, name) * (1.0 + getattr(delta, name)) for name in PARAMETERS})
        for stage, delta in zip(config.stages, deltas)
    )
    return config.replace(stages=stages)


__all__ = (
    'PARAMETERS',
    'sample_mismatch',
    'apply_mismatch',
)
