import math
from functools import partial
from logging import getLogger
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ilro import settings as ilro_settings
from ilro.exceptions import NumericalError, StudyInvalidError
from ilro.workers import map_ordered
from phasor.models import OscillatorConfig
from phasor.solvers import reference_amplitude, solve_network, with_injection
from phasor.utils import wrap_angle
from timedomain.integrator import simulate_batch
from timedomain.measurements import detect_lock, extract_phases
from timedomain.models import SimSettings
from .models import MismatchSpec, MismatchStudy, StudyMode
from .sampling import apply_mismatch, sample_mismatch

logger = getLogger(__name__)

MAX_UNLOCKED_FRACTION: float = 0.05

Outcome = Tuple[bool, float]


def worst_node_error(node_phases: Sequence[float]) -> float:
    """Signed worst deviation from pi/N spacing in degrees, common mode removed."""
    n = len(node_phases)
    offsets = np.array([wrap_angle(p - i * math.pi / n) for i, p in enumerate(node_phases)])
    common = math.atan2(float(np.sum(np.sin(offsets))), float(np.sum(np.cos(offsets))))
    errors = [wrap_angle(float(o) - common) for o in offsets]
    worst = max(errors, key=abs)
    return math.degrees(worst)


def _phasor_case(reference: Tuple[float, float], config: OscillatorConfig) -> Outcome:
    try:
        solution = solve_network(config, reference=reference)
    except NumericalError as exc:
        logger.debug("network solve failed: %s", exc)
        return False, math.nan
    if not solution.locked:
        return False, math.nan
    return True, worst_node_error([p.angle for p in solution.node_phasors])


def _time_domain_batch(reference: Tuple[float, float], settings: SimSettings,
                       configs: Sequence[OscillatorConfig]) -> List[Outcome]:
    outcomes = []
    for w in simulate_batch(configs, settings, reference=reference):
        reading = extract_phases(w, settings)
        if detect_lock(reading, settings):
            outcomes.append((True, worst_node_error(reading.node_phases)))
        else:
            outcomes.append((False, math.nan))
    return outcomes


def run_mismatch_study(
        config: OscillatorConfig,
        spec: MismatchSpec,
        k_grid: Sequence[float],
        mode: StudyMode = StudyMode.TIME_DOMAIN,
        settings: Optional[SimSettings] = None,
        jobs: Optional[int] = None,
        batch: Optional[int] = None,
) -> MismatchStudy:
    """
    Worst-node phase error of every mismatch sample at every k. The same
    samples are reused across k so the trend is not masked by resampling.
    """
    mode = StudyMode(mode)
    k_grid = tuple(float(k) for k in k_grid)
    reference = reference_amplitude(config)
    if settings is None:
        settings = SimSettings.for_frequency(config.f_inj)
    samples = [apply_mismatch(config, sample_mismatch(spec, i, config.n_stages)) for i in range(spec.n_samples)]

    outcomes: List[List[Outcome]] = []
    for k in k_grid:
        cases = [with_injection(sample, k_inj=k) for sample in samples]
        if mode is StudyMode.PHASOR:
            outcomes.append(map_ordered(partial(_phasor_case, reference), cases, jobs))
        else:
            size = batch or ilro_settings.SIM_BATCH
            chunks = [cases[i:i + size] for i in range(0, len(cases), size)]
            results = map_ordered(partial(_time_domain_batch, reference, settings), chunks, jobs)
            outcomes.append([outcome for chunk in results for outcome in chunk])

    sigmas, kept, indices, locked_counts, unlocked_counts = [], [], [], [], []
    for k, per_sample in zip(k_grid, outcomes):
        errors = [error for locked, error in per_sample if locked]
        index = [i for i, (locked, _) in enumerate(per_sample) if locked]
        unlocked = len(per_sample) - len(errors)
        if unlocked:
            logger.warning("k=%.3f: excluded %d unlocked sample(s) of %d", k, unlocked, len(per_sample))
        if unlocked > MAX_UNLOCKED_FRACTION * len(per_sample) or len(errors) < 2:
            raise StudyInvalidError(f"k={k:.3f}: {unlocked} of {len(per_sample)} samples did not lock")
        sigmas.append(float(np.std(errors, ddof=1)))
        kept.append(tuple(errors))
        indices.append(tuple(index))
        locked_counts.append(len(errors))
        unlocked_counts.append(unlocked)
        logger.info("k=%.3f: sigma %.4f deg over %d samples", k, sigmas[-1], len(errors))

    return MismatchStudy(k_grid=k_grid, per_k_sigma=tuple(sigmas), per_k_samples=tuple(kept),
                         n_locked=tuple(locked_counts), n_unlocked=tuple(unlocked_counts), mode=mode,
                         sample_index=tuple(indices))


__all__ = (
    'MAX_UNLOCKED_FRACTION',
    'worst_node_error',
    'run_mismatch_study',
)
