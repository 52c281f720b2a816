"""
Strict JSON experiment configuration. Angles are given in degrees and
frequencies in hertz; everything is converted to radians on the way into the
domain types. Unknown keys, duplicate keys and non-finite literals are
rejected.
"""
import copy
import json
import math
import re
from dataclasses import replace
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from django import forms
from django.core.exceptions import NON_FIELD_ERRORS

from ilro import settings
from ilro.exceptions import ConfigParseError, ConfigurationError
from montecarlo.models import MismatchSpec, StudyMode
from phasor.models import OscillatorConfig
from phasor.reference import REFERENCE_AM_PM, REFERENCE_F_INJ, reference_stage
from phasor.solvers import with_free_running_frequency
from timedomain.measurements import DEFAULT_THETA_GRID, PERTURBATION_MODES
from timedomain.models import MIN_SAMPLES_PER_PERIOD, SimSettings
from .models import Experiment, ExperimentConfig, SweepSettings

logger = getLogger(__name__)


def _error(field: str, constraint: str, value: Any = None) -> forms.ValidationError:
    return forms.ValidationError(str(constraint).replace('%', '%%'), code='invalid',
                                 params={'field': field, 'value': value})


class IntegerValueField(forms.IntegerField):
    """Accepts a decoded JSON integer only; no coercion from strings or floats."""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise forms.ValidationError(self.error_messages['invalid'], code='invalid')
        return value


class FloatValueField(forms.FloatField):

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise forms.ValidationError(self.error_messages['invalid'], code='invalid')
        return float(value)


class FloatListField(forms.Field):
    default_error_messages = {
        'invalid': 'Enter a list of numbers.',
    }

    def to_python(self, value):
        if value is None:
            return None
        if not isinstance(value, list):
            raise forms.ValidationError(self.error_messages['invalid'], code='invalid')
        item = FloatValueField()
        return [item.clean(v) for v in value]

    def validate(self, value):
        # an empty list is a value here, not a missing one
        if value is None and self.required:
            raise forms.ValidationError(self.error_messages['required'], code='required')


class BooleanValueField(forms.BooleanField):
    widget = forms.HiddenInput
    default_error_messages = {
        'invalid': 'Enter true or false.',
    }

    def to_python(self, value):
        if not isinstance(value, bool):
            raise forms.ValidationError(self.error_messages['invalid'], code='invalid')
        return value


class ConfigForm(forms.Form):
    """
    One object of the configuration file. Missing keys take `defaults`;
    cleaned_data holds the section in boundary units and `instance` the domain
    object built from it. Errors are reported as ConfigurationError with
    dotted field names.
    """
    defaults: Dict[str, Any] = {}
    sections: Dict[str, type] = {}

    def __init__(self, data: Mapping[str, Any], section: str = '', context: Optional[Mapping[str, Any]] = None):
        self.raw = data
        self.section = section
        self.context = context or {}
        self.instance: Any = None
        super().__init__(data=dict(copy.deepcopy(self.defaults), **data))

    def qualify(self, name: str) -> str:
        return f"{self.section}.{name}" if self.section and name else (name or self.section)

    def clean(self):
        cleaned_data = super().clean()
        for name in self.raw:
            if name not in self.fields and name not in self.sections:
                self.add_error(None, _error(name, 'unknown field'))
        if self.errors:
            return cleaned_data
        try:
            self.instance = self.build(cleaned_data)
        except ConfigurationError as exc:
            self.add_error(None, _error(exc.field, exc.constraint, exc.value))
        return cleaned_data

    def build(self, data: Dict[str, Any]) -> Any:
        return data

    def config_errors(self) -> List[ConfigurationError]:
        found = []
        for name, errors in self.errors.as_data().items():
            for error in errors:
                params = error.params or {}
                field = params.get('field', '' if name == NON_FIELD_ERRORS else name)
                value = params['value'] if 'value' in params else self.raw.get(field)
                found.append(ConfigurationError(self.qualify(field), '; '.join(error.messages), value))
        return found


class OscillatorForm(ConfigForm):
    n_stages = IntegerValueField(min_value=2)
    f_inj = FloatValueField()
    injection_ratio = FloatValueField()
    phase_offset = FloatValueField()
    f_fr = FloatValueField(required=False)
    r_load = FloatValueField(required=False)
    c_load = FloatValueField(required=False)
    gm_peak = FloatValueField(required=False)
    theta_vi0 = FloatValueField(required=False)
    am_pm_coeff = FloatValueField()
    v_sat = FloatValueField(required=False)
    gm_cross = FloatValueField()

    defaults = {
        'n_stages': 2,
        'f_inj': REFERENCE_F_INJ,
        'injection_ratio': 0.1,
        'phase_offset': 0.0,
        'am_pm_coeff': 0.0,
        'gm_cross': 0.0,
    }

    def build(self, data: Dict[str, Any]) -> OscillatorConfig:
        n = data['n_stages']
        if 'am_pm_coeff' not in self.raw:
            data['am_pm_coeff'] = self.context.get('am_pm_coeff', data['am_pm_coeff'])
        overrides = {name: data[name] for name in ('r_load', 'c_load', 'gm_peak', 'v_sat') if data[name] is not None}
        overrides['gm_cross'] = data['gm_cross']
        if data['theta_vi0'] is not None:
            overrides['theta_vi0'] = math.radians(data['theta_vi0'])
        stage = replace(reference_stage(n, data['am_pm_coeff']), **overrides)
        config = OscillatorConfig.uniform(n, stage, data['injection_ratio'], data['f_inj'],
                                          phase_offset=math.radians(data['phase_offset']))
        f_fr = data['f_fr']
        if f_fr is None and n > 4 and data['c_load'] is None:
            f_fr = data['f_inj']
        if f_fr is not None:
            if f_fr <= 0.0:
                raise ConfigurationError('f_fr', 'must be finite and > 0', f_fr)
            config = with_free_running_frequency(config, f_fr)

        resolved = config.stages[0]
        data.update(r_load=resolved.r_load, c_load=resolved.c_load, gm_peak=resolved.gm_peak,
                    theta_vi0=math.degrees(resolved.theta_vi0), v_sat=resolved.v_sat, f_fr=f_fr)
        return config


class SimForm(ConfigForm):
    samples_per_period = IntegerValueField(min_value=MIN_SAMPLES_PER_PERIOD)
    settle_periods = IntegerValueField(min_value=0)
    measure_periods = IntegerValueField()
    v_init = FloatListField()

    defaults = {
        'samples_per_period': MIN_SAMPLES_PER_PERIOD,
        'settle_periods': 200,
        'measure_periods': 512,
        'v_init': [],
    }

    def build(self, data: Dict[str, Any]) -> SimSettings:
        sim = SimSettings.for_frequency(self.context['f_inj'], data['samples_per_period'],
                                        settle_periods=data['settle_periods'],
                                        measure_periods=data['measure_periods'], v_init=tuple(data['v_init']))
        data['dt'] = sim.dt
        return sim


class SweepForm(ConfigForm):
    k_grid = FloatListField(required=False)
    phi0_grid = FloatListField()
    theta_grid = FloatListField()
    f_fr_grid = FloatListField()
    oracle_theta_grid = FloatListField()
    step = FloatValueField()
    perturbation = forms.ChoiceField(choices=[(mode, mode) for mode in PERTURBATION_MODES])
    study_mode = forms.ChoiceField(choices=[(mode.value, mode.value) for mode in StudyMode])

    defaults = {
        'phi0_grid': [],
        'theta_grid': [],
        'f_fr_grid': [],
        'oracle_theta_grid': [math.degrees(t) for t in DEFAULT_THETA_GRID],
        'step': 1e-6,
        'perturbation': 'differential',
        'study_mode': StudyMode.TIME_DOMAIN.value,
    }

    def build(self, data: Dict[str, Any]) -> SweepSettings:
        if data['k_grid'] is None:
            data['k_grid'] = [self.context['injection_ratio']]
        for name in ('phi0_grid', 'theta_grid', 'f_fr_grid'):
            grid = data[name]
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigurationError(name, 'must be strictly increasing', grid)
        if not 0.0 < data['step'] <= 1e-3:
            raise ConfigurationError('step', 'must lie in (0, 1e-3]', data['step'])
        return SweepSettings(
            k_grid=tuple(data['k_grid']),
            phi0_grid=tuple(math.radians(v) for v in data['phi0_grid']),
            theta_grid=tuple(math.radians(v) for v in data['theta_grid']),
            f_fr_grid=tuple(data['f_fr_grid']),
            oracle_theta_grid=tuple(math.radians(v) for v in data['oracle_theta_grid']),
            step=data['step'],
            perturbation=data['perturbation'],
            study_mode=StudyMode(data['study_mode']),
        )


class MismatchForm(ConfigForm):
    sigma_r = FloatValueField()
    sigma_c = FloatValueField()
    sigma_gm = FloatValueField()
    n_samples = IntegerValueField()
    seed = IntegerValueField()

    defaults = {
        'sigma_r': 0.01,
        'sigma_c': 0.01,
        'sigma_gm': 0.01,
        'n_samples': 200,
        'seed': 0,
    }

    def build(self, data: Dict[str, Any]) -> MismatchSpec:
        return MismatchSpec(**data)


class ExperimentForm(ConfigForm):
    experiment = forms.ChoiceField(choices=[(e.value, e.value) for e in Experiment])
    output_dir = forms.CharField(required=False, empty_value=None)
    include_oracle = BooleanValueField(required=False)

    defaults = {
        'include_oracle': False,
    }
    sections = {
        'oscillator': OscillatorForm,
        'sim': SimForm,
        'sweep': SweepForm,
        'mismatch': MismatchForm,
    }

    def _section(self, name: str, context: Mapping[str, Any]) -> Any:
        data = self.raw.get(name, {})
        if not isinstance(data, dict):
            self.add_error(None, _error(name, 'must be an object', data))
            return None
        form = self.sections[name](data, section=name, context=context)
        if not form.is_valid():
            for error in form.config_errors():
                self.add_error(None, _error(error.field, error.constraint, error.value))
        self.cleaned_data[name] = form.cleaned_data
        return form.instance

    def build(self, data: Dict[str, Any]) -> Tuple[Any, ...]:
        if 'oscillator' not in self.raw:
            raise ConfigurationError('oscillator', 'is required')
        experiment = Experiment(data['experiment'])
        if experiment is Experiment.MONTE_CARLO and 'mismatch' not in self.raw:
            self.raw = dict(self.raw, mismatch={})

        # zero-sensitivity defaults to the amplitude-to-phase reference stage
        oscillator = self._section('oscillator', {'am_pm_coeff': REFERENCE_AM_PM}
                                   if experiment is Experiment.ZERO_SENSITIVITY else {})
        if oscillator is None:
            return None
        context = {'f_inj': oscillator.f_inj, 'injection_ratio': oscillator.injection_ratio}
        sim = self._section('sim', context)
        sweep = self._section('sweep', context)
        mismatch = self._section('mismatch', context) if 'mismatch' in self.raw else None
        if self.errors:
            return None
        self._check_experiment(experiment, oscillator, sim, sweep)
        return oscillator, sim, sweep, mismatch

    def _check_experiment(self, experiment: Experiment, oscillator: OscillatorConfig, sim: SimSettings,
                          sweep: SweepSettings) -> None:
        include_oracle = self.cleaned_data['include_oracle']
        simulated = (
            experiment is Experiment.SIMULATE
            or (experiment is Experiment.MONTE_CARLO and sweep.study_mode is StudyMode.TIME_DOMAIN)
            or (include_oracle and experiment in (
                Experiment.SENSITIVITY_VS_THETA, Experiment.SENSITIVITY_VS_PHI0, Experiment.SENSITIVITY_VS_FFR))
        )
        am_pm = oscillator.stages[0].am_pm_coeff
        if simulated and am_pm != 0.0:
            self.add_error(None, _error('oscillator.am_pm_coeff', 'the time-domain simulator requires 0', am_pm))
        gm_cross = oscillator.stages[0].gm_cross
        if gm_cross != 0.0 and not (experiment is Experiment.SIMULATE or (
                experiment is Experiment.MONTE_CARLO and sweep.study_mode is StudyMode.TIME_DOMAIN)):
            self.add_error(None, _error('oscillator.gm_cross',
                                        'only the time-domain simulator models the cross-coupled pair', gm_cross))
        if experiment is Experiment.ZERO_SENSITIVITY and am_pm == 0.0:
            logger.warning("zero-sensitivity with am_pm_coeff = 0: the closed-form sensitivity has no zero to find")
        if simulated:
            try:
                sim.samples_per_period(oscillator.f_inj)
            except ConfigurationError as exc:
                self.add_error(None, _error(f"sim.{exc.field}", exc.constraint, exc.value))
        if experiment in (Experiment.SENSITIVITY_VS_PHI0, Experiment.SENSITIVITY_VS_FFR,
                          Experiment.ZERO_SENSITIVITY):
            for k in sweep.k_grid:
                if k <= 0.0:
                    self.add_error(None, _error('sweep.k_grid', 'needs k_inj > 0 for a non-degenerate locking range',
                                                k))
        if experiment in (Experiment.SENSITIVITY_VS_PHI0, Experiment.SENSITIVITY_VS_FFR) \
                and include_oracle and len(sweep.oracle_theta_grid) < 2:
            self.add_error(None, _error('sweep.oracle_theta_grid', 'needs at least two points for a slope'))


def _position(text: str, offset: int) -> Tuple[int, int]:
    line = text.count('\n', 0, offset) + 1
    return line, offset - (text.rfind('\n', 0, offset) + 1) + 1


def parse_strict_json(text: str) -> Any:
    """json.loads that rejects duplicate keys and NaN/Infinity literals."""

    def reject_duplicates(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
        result: Dict[str, Any] = {}
        for key, value in pairs:
            if key in result:
                matches = list(re.finditer(r'"' + re.escape(key) + r'"\s*:', text))
                line, column = _position(text, matches[1].start()) if len(matches) > 1 else (None, None)
                raise ConfigParseError(f"duplicate key {key!r}", line, column)
            result[key] = value
        return result

    def reject_constant(name: str) -> Any:
        raise ConfigParseError(f"non-finite literal {name} is not allowed")

    try:
        return json.loads(text, object_pairs_hook=reject_duplicates, parse_constant=reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from exc


def build_config(data: Any, experiment: Optional[str] = None, output_dir: Optional[str] = None,
                 include_oracle: Optional[bool] = None, seed: Optional[int] = None,
                 jobs: Optional[int] = None) -> ExperimentConfig:
    """Validate a parsed configuration; keyword arguments override the file."""
    if not isinstance(data, dict):
        raise ConfigurationError('', 'the configuration must be a JSON object')
    data = dict(data)
    if experiment is not None:
        data['experiment'] = experiment
    if output_dir is not None:
        data['output_dir'] = str(output_dir)
    if include_oracle:
        data['include_oracle'] = True
    if seed is not None and isinstance(data.get('mismatch', {}), dict):
        data['mismatch'] = dict(data.get('mismatch', {}), seed=seed)

    form = ExperimentForm(data)
    if not form.is_valid():
        errors = form.config_errors()
        for error in errors[1:]:
            logger.error("%s", error)
        raise errors[0]

    oscillator, sim, sweep, mismatch = form.instance
    resolved = dict(form.cleaned_data)
    resolved['output_dir'] = resolved['output_dir'] or str(settings.OUTPUT_DIR)
    if mismatch is None:
        resolved.pop('mismatch', None)
    return ExperimentConfig(
        experiment=Experiment(resolved['experiment']),
        oscillator=oscillator,
        sim=sim,
        sweep=sweep,
        mismatch=mismatch,
        output_dir=Path(resolved['output_dir']),
        include_oracle=resolved['include_oracle'],
        jobs=jobs,
        resolved=resolved,
    )


def load_config(path: Path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return build_config(parse_strict_json(text), **overrides)


__all__ = (
    'IntegerValueField',
    'FloatValueField',
    'FloatListField',
    'BooleanValueField',
    'ConfigForm',
    'OscillatorForm',
    'SimForm',
    'SweepForm',
    'MismatchForm',
    'ExperimentForm',
    'parse_strict_json',
    'build_config',
    'load_config',
)
