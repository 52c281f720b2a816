import math

import pytest
from hypothesis import given, strategies as st

from ilro.exceptions import ConfigurationError
from phasor.models import LockState, OscillatorConfig, Phasor, StageModel, nominal_injection_phases


@given(st.floats(0.0, 10.0), st.floats(-100.0, 100.0))
def test_phasor_angle_is_normalised(magnitude, angle):
    p = Phasor(magnitude, angle)
    assert -math.pi < p.angle <= math.pi
    assert p.to_complex() == pytest.approx(magnitude * complex(math.cos(angle), math.sin(angle)), abs=1e-9)


def test_phasor_sum_and_scale():
    total = Phasor(1.0, 0.0) + Phasor(1.0, math.pi / 2)
    assert total.magnitude == pytest.approx(math.sqrt(2.0))
    assert total.angle == pytest.approx(math.pi / 4)
    flipped = Phasor(2.0, 0.5).scale(-0.5)
    assert flipped.magnitude == pytest.approx(1.0)
    assert flipped.angle == pytest.approx(0.5 - math.pi)
    assert Phasor(1.0, -math.pi).angle == pytest.approx(math.pi)


def test_phasor_rejects_negative_magnitude():
    with pytest.raises(ConfigurationError):
        Phasor(-1.0, 0.0)


def test_stage_model_corner_frequency():
    stage = StageModel()
    assert stage.f_3db == pytest.approx(7.0e9)
    assert stage.gm_small_signal * stage.r_load == pytest.approx(2.0)
    assert abs(stage.impedance(stage.f_3db)) == pytest.approx(stage.r_load / math.sqrt(2.0))


@pytest.mark.parametrize('field', ['r_load', 'c_load', 'gm_peak', 'v_sat'])
def test_stage_model_rejects_nonpositive(field):
    with pytest.raises(ConfigurationError) as info:
        StageModel(**{field: 0.0})
    assert info.value.field == field


def test_stage_model_rejects_negative_cross_pair():
    with pytest.raises(ConfigurationError) as info:
        StageModel(gm_cross=-1e-4)
    assert info.value.field == 'gm_cross'


def test_config_defaults_to_nominal_phases():
    config = OscillatorConfig(n_stages=4, stages=(StageModel(),) * 4, injection_ratio=0.1, f_inj=7e9)
    assert config.injection_phases == nominal_injection_phases(4)
    assert config.identical_stages
    assert config.excess_lag == pytest.approx(math.pi / 4)


@pytest.mark.parametrize('changes', [
    dict(injection_ratio=1.0),
    dict(injection_ratio=-0.1),
    dict(f_inj=0.0),
    dict(injection_phases=(0.0, 0.1)),
    dict(injection_phases=(0.0,)),
])
def test_config_validation(changes):
    fields = dict(n_stages=2, stages=(StageModel(),) * 2, injection_ratio=0.1, f_inj=7e9)
    fields.update(changes)
    with pytest.raises(ConfigurationError):
        OscillatorConfig(**fields)


def test_config_rejects_single_stage():
    with pytest.raises(ConfigurationError):
        OscillatorConfig(n_stages=1, stages=(StageModel(),), injection_ratio=0.1, f_inj=7e9)


def test_unlocked_state_carries_no_angles():
    state = LockState(f_fr=7e9, f_inj=7.5e9, k_inj=0.1, locked=False)
    assert state.phi0 is None and state.psi is None
    assert state.detuning == pytest.approx(0.5e9)
    with pytest.raises(ConfigurationError):
        LockState(f_fr=7e9, f_inj=7e9, k_inj=0.1, locked=False, phi0=0.0, psi=0.0)
