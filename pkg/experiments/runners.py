import math
import time
from functools import partial
from logging import getLogger
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ilro.exceptions import OutputError, PartialResultError
from ilro.workers import map_ordered
from montecarlo.models import ERROR_METRIC
from montecarlo.study import run_mismatch_study
from phasor.models import OscillatorConfig
from phasor.solvers import locking_range, solve_lock_state, with_free_running_frequency, with_injection
from sensitivity.analysis import find_zero_sensitivity_frequency
from sensitivity.models import SweepAxis, SweepRow
from sensitivity.sweeps import default_grid, sweep_sensitivity
from timedomain.integrator import simulate
from timedomain.measurements import (
    detect_lock,
    extract_phases,
    measure_sensitivity_sim,
    simulate_quadrature_errors,
    write_waveforms,
)
from timedomain.models import SimSettings
from .models import ArtifactSet, Experiment, ExperimentConfig
from .writers import emit_csv, make_table, write_metadata

logger = getLogger(__name__)

ESTIMATOR_COLUMNS: Tuple[str, ...] = ('implicit', 'closed_form', 'closed_form_rederived', 'approx', 'oracle_matching')

Outputs = Tuple[List[Path], Dict[str, Any]]


def _degrees(value: Optional[float]) -> float:
    return math.nan if value is None else math.degrees(value)


def _per_k(config: ExperimentConfig) -> List[Tuple[float, OscillatorConfig]]:
    return [(k, with_injection(config.oscillator, k_inj=k)) for k in config.sweep.k_grid]


def _k_path(out: Path, stem: str, k: float) -> Path:
    return out / f"{stem}_k{k:g}.csv"


def run_lock(config: ExperimentConfig, out: Path) -> Outputs:
    n = config.oscillator.n_stages
    state_rows, range_rows = [], []
    for k, oscillator in _per_k(config):
        state = solve_lock_state(oscillator)
        phases = [math.degrees(p.angle) for p in state.node_phasors] or [math.nan] * n
        state_rows.append([k, state.f_fr, state.f_inj, state.detuning, state.locked, _degrees(state.phi0),
                           _degrees(state.psi)] + phases)
        f_fr_lo, f_fr_hi = locking_range(oscillator, axis='f_fr')
        f_inj_lo, f_inj_hi = locking_range(oscillator, axis='f_inj')
        range_rows.append([k, f_fr_lo, f_fr_hi, f_inj_lo, f_inj_hi, f_fr_hi <= f_fr_lo])

    state_columns = ['k_inj', 'f_fr', 'f_inj', 'detuning', 'locked', 'phi0_deg', 'psi_deg']
    state_columns += [f"node{i}_phase_deg" for i in range(n)]
    files = [
        emit_csv(make_table(state_columns, state_rows), out / 'lock_state.csv'),
        emit_csv(make_table(['k_inj', 'f_fr_low', 'f_fr_high', 'f_inj_low', 'f_inj_high', 'degenerate'],
                            range_rows), out / 'locking_range.csv'),
    ]
    return files, {}


def run_sensitivity_vs_theta(config: ExperimentConfig, out: Path) -> Outputs:
    files = []
    for k, oscillator in _per_k(config):
        grid = list(config.sweep.theta_grid) or default_grid(oscillator, SweepAxis.THETA)
        rows = sweep_sensitivity(oscillator, SweepAxis.THETA, grid, step=config.sweep.step, jobs=config.jobs)
        columns = ['theta_deg', 'quadrature_error_deg', 'locked']
        table = [[math.degrees(row.value), math.degrees(row.quadrature_error), row.locked] for row in rows]
        if config.include_oracle:
            points = simulate_quadrature_errors(oscillator, config.sim, grid, config.sweep.perturbation)
            columns += ['simulated_quadrature_error_deg', 'simulated_locked']
            for cells, point in zip(table, points):
                cells += [math.degrees(point.quadrature_error) if point.locked else math.nan, point.locked]
        files.append(emit_csv(make_table(columns, table), _k_path(out, 'sensitivity_vs_theta', k)))
    return files, {}


def _simulated_slope(oscillator: OscillatorConfig, settings: SimSettings, theta_grid: Sequence[float],
                     mode: str, row: SweepRow) -> float:
    if not row.locked:
        return math.nan
    try:
        return measure_sensitivity_sim(with_free_running_frequency(oscillator, row.f_fr), settings, theta_grid, mode)
    except PartialResultError as exc:
        logger.warning("k=%.3f, f_fr=%.6e Hz: %s", row.k_inj, row.f_fr, exc)
        return math.nan


def _sensitivity_table(config: ExperimentConfig, oscillator: OscillatorConfig, axis: SweepAxis,
                       grid: Sequence[float]) -> Any:
    rows = sweep_sensitivity(oscillator, axis, grid or None, step=config.sweep.step, jobs=config.jobs)
    if axis is SweepAxis.PHI0:
        columns = ['phi0_deg', 'f_fr', 'psi_deg', 'locked']
    else:
        columns = ['f_fr', 'phi0_deg', 'psi_deg', 'locked']
    columns += list(ESTIMATOR_COLUMNS)

    table = []
    for row in rows:
        if axis is SweepAxis.PHI0:
            cells = [math.degrees(row.value), row.f_fr, math.degrees(row.psi), row.locked]
        else:
            cells = [row.f_fr, math.degrees(row.phi0), math.degrees(row.psi), row.locked]
        estimate = row.sensitivity
        if estimate is None:
            cells += [math.nan] * len(ESTIMATOR_COLUMNS)
        else:
            cells += [estimate.implicit, estimate.closed_form, estimate.closed_form_rederived, estimate.approx,
                      estimate.oracle_matching]
        table.append(cells)

    if config.include_oracle:
        worker = partial(_simulated_slope, oscillator, config.sim, config.sweep.oracle_theta_grid,
                         config.sweep.perturbation)
        columns.append('simulated')
        for cells, slope in zip(table, map_ordered(worker, rows, config.jobs)):
            cells.append(slope)
    return make_table(columns, table)


def _zero_table(configs: Sequence[Tuple[float, OscillatorConfig]]) -> Any:
    table = []
    for k, oscillator in configs:
        result = find_zero_sensitivity_frequency(oscillator)
        lo, hi = result.locking_range
        f_opt = math.nan if result.f_opt is None else result.f_opt
        table.append([k, result.f_inj, lo, hi, result.found, f_opt, result.above_injection, len(result.crossings)])
    columns = ['k_inj', 'f_inj', 'f_fr_low', 'f_fr_high', 'found', 'f_opt', 'above_injection', 'n_crossings']
    return make_table(columns, table)


def run_sensitivity_vs_phi0(config: ExperimentConfig, out: Path) -> Outputs:
    files = [
        emit_csv(_sensitivity_table(config, oscillator, SweepAxis.PHI0, config.sweep.phi0_grid),
                 _k_path(out, 'sensitivity_vs_phi0', k))
        for k, oscillator in _per_k(config)
    ]
    return files, {}


def run_sensitivity_vs_ffr(config: ExperimentConfig, out: Path) -> Outputs:
    configs = _per_k(config)
    files = [
        emit_csv(_sensitivity_table(config, oscillator, SweepAxis.F_FR, config.sweep.f_fr_grid),
                 _k_path(out, 'sensitivity_vs_ffr', k))
        for k, oscillator in configs
    ]
    files.append(emit_csv(_zero_table(configs), out / 'zero_crossings.csv'))
    return files, {}


def run_zero_sensitivity(config: ExperimentConfig, out: Path) -> Outputs:
    return [emit_csv(_zero_table(_per_k(config)), out / 'zero_sensitivity.csv')], {}


def run_monte_carlo(config: ExperimentConfig, out: Path) -> Outputs:
    study = run_mismatch_study(config.oscillator, config.mismatch, config.sweep.k_grid,
                               mode=config.sweep.study_mode, settings=config.sim, jobs=config.jobs)
    raw = [
        [k, index, error]
        for k, indices, errors in zip(study.k_grid, study.sample_index, study.per_k_samples)
        for index, error in zip(indices, errors)
    ]
    summary = [
        [k, sigma, locked, unlocked]
        for k, sigma, locked, unlocked in zip(study.k_grid, study.per_k_sigma, study.n_locked, study.n_unlocked)
    ]
    files = [
        emit_csv(make_table(['k_inj', 'sample_index', 'phase_error_deg'], raw), out / 'monte_carlo_raw.csv'),
        emit_csv(make_table(['k_inj', 'sigma_deg', 'n_locked', 'n_unlocked'], summary),
                 out / 'monte_carlo_summary.csv'),
    ]
    return files, {'error_metric': ERROR_METRIC, 'study_mode': study.mode.value}


def run_simulate(config: ExperimentConfig, out: Path) -> Outputs:
    waveforms = simulate(config.oscillator, config.sim)
    reading = extract_phases(waveforms, config.sim)
    locked = detect_lock(reading, config.sim)
    n = config.oscillator.n_stages
    drift = reading.node_drift or (reading.drift_rate,) * n
    table = [
        [i, math.degrees(reading.node_phases[i]), math.degrees(reading.spacing(i)),
         math.degrees(reading.complement_offsets[i]), reading.amplitudes[i], drift[i], locked]
        for i in range(n)
    ]
    columns = ['node', 'phase_deg', 'spacing_deg', 'complement_offset_deg', 'amplitude', 'drift_rate', 'locked']
    files = [
        write_waveforms(waveforms, out / 'waveforms.csv'),
        emit_csv(make_table(columns, table), out / 'phases.csv'),
    ]
    return files, {'locked': locked}


RUNNERS: Dict[Experiment, Callable[[ExperimentConfig, Path], Outputs]] = {
    Experiment.LOCK: run_lock,
    Experiment.SENSITIVITY_VS_THETA: run_sensitivity_vs_theta,
    Experiment.SENSITIVITY_VS_PHI0: run_sensitivity_vs_phi0,
    Experiment.SENSITIVITY_VS_FFR: run_sensitivity_vs_ffr,
    Experiment.ZERO_SENSITIVITY: run_zero_sensitivity,
    Experiment.MONTE_CARLO: run_monte_carlo,
    Experiment.SIMULATE: run_simulate,
}


def run_experiment(config: ExperimentConfig) -> ArtifactSet:
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(out, exc.strerror or str(exc)) from exc

    logger.info("running %s into %s", config.experiment.value, out)
    started = time.perf_counter()
    files, extra = RUNNERS[config.experiment](config, out)
    elapsed = time.perf_counter() - started
    metadata = write_metadata(config, out / 'metadata.json', files, elapsed, extra)
    logger.info("%s finished in %.1f s, %d file(s)", config.experiment.value, elapsed, len(files))
    return ArtifactSet(experiment=config.experiment, output_dir=out, files=tuple(files), metadata=metadata,
                       elapsed=elapsed)


__all__ = (
    'RUNNERS',
    'run_lock',
    'run_sensitivity_vs_theta',
    'run_sensitivity_vs_phi0',
    'run_sensitivity_vs_ffr',
    'run_zero_sensitivity',
    'run_monte_carlo',
    'run_simulate',
    'run_experiment',
)
