import numpy as np
import pytest

from ilro.exceptions import ConfigurationError
from montecarlo.models import MismatchSpec, StageDelta
from montecarlo.sampling import apply_mismatch, sample_mismatch
from phasor.reference import reference_config


def test_zero_sigmas_give_zero_deltas():
    spec = MismatchSpec(sigma_r=0.0, sigma_c=0.0, sigma_gm=0.0, n_samples=4, seed=3)
    assert sample_mismatch(spec, 2, 4) == (StageDelta(),) * 4


def test_samples_are_keyed_by_seed_and_index():
    spec = MismatchSpec(n_samples=10, seed=12345)
    assert sample_mismatch(spec, 3, 4) == sample_mismatch(spec, 3, 4)
    assert sample_mismatch(spec, 3, 4) != sample_mismatch(spec, 4, 4)
    assert sample_mismatch(spec, 3, 4) != sample_mismatch(MismatchSpec(n_samples=10, seed=12346), 3, 4)
    first, second = sample_mismatch(spec, 0, 2)
    assert first != second
    assert len({first.r_load, first.c_load, first.gm_peak}) == 3


def test_sample_spread_matches_sigma():
    spec = MismatchSpec(sigma_r=0.01, sigma_c=0.0, sigma_gm=0.0, n_samples=10_000, seed=2024)
    values = np.array([sample_mismatch(spec, i, 1)[0].r_load for i in range(spec.n_samples)])
    assert 0.0097 <= np.std(values, ddof=1) <= 0.0103
    assert abs(np.mean(values)) < 4 * 0.01 / np.sqrt(spec.n_samples)


@pytest.mark.parametrize('fields', [
    dict(sigma_r=0.3),
    dict(sigma_c=-0.01),
    dict(n_samples=1),
    dict(seed=-1),
    dict(seed=2 ** 64),
])
def test_mismatch_spec_validation(fields):
    with pytest.raises(ConfigurationError):
        MismatchSpec(**fields)


def test_index_must_be_in_range():
    with pytest.raises(ConfigurationError):
        sample_mismatch(MismatchSpec(n_samples=5), 5, 2)


def test_apply_mismatch_scales_each_stage():
    config = reference_config(2, 0.1)
    perturbed = apply_mismatch(config, (StageDelta(r_load=0.01), StageDelta(c_load=-0.02, gm_peak=0.03)))
    assert perturbed.stages[0].r_load == pytest.approx(1.01e3)
    assert perturbed.stages[1].c_load == pytest.approx(0.98 * config.stages[1].c_load)
    assert perturbed.stages[1].gm_peak == pytest.approx(1.03 * config.stages[1].gm_peak)
    assert perturbed.stages[1].r_load == config.stages[1].r_load
