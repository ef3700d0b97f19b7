import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.data.mixing import PEAK_LIMIT, crop_offset, fit_noise, mix_at_snr, snr_db, tiled_length
from src.data.utterance import Utterance
from src.utils.exceptions import DataLoadingError, DegenerateInputError


def test_requested_snr_is_met_over_many_random_cases():
    rng = np.random.default_rng(0)
    for case in range(1000):
        clean_len = int(rng.integers(50, 400))
        noise_len = int(rng.integers(10, 800))
        clean = Utterance(rng.standard_normal(clean_len) * rng.uniform(0.01, 3.0), 16000)
        noise = Utterance(rng.standard_normal(noise_len) * rng.uniform(0.01, 3.0), 16000, label=2)
        target = float(rng.uniform(-10.0, 30.0))

        mixture = mix_at_snr(clean, noise, target, seed=case)
        residual = mixture.samples - mixture.clean_ref
        assert abs(snr_db(mixture.clean_ref, residual) - target) < 1e-6
        assert np.max(np.abs(mixture.samples)) <= PEAK_LIMIT + 1e-12
        assert mixture.label == 2
        assert len(mixture) == clean_len


def test_quiet_mixture_is_not_rescaled():
    clean = Utterance(np.full(100, 0.01), 8000)
    noise = Utterance(np.full(100, 0.01), 8000)
    mixture = mix_at_snr(clean, noise, 0.0, seed=1)
    assert mixture.meta['scale'] == 1.0
    assert_allclose(mixture.clean_ref, clean.samples)
    assert_allclose(mixture.samples, 0.02)


def test_short_noise_is_tiled():
    assert tiled_length(30, 100) == 120
    assert tiled_length(200, 100) == 200
    noise = np.arange(30.0)
    excerpt, offset = fit_noise(noise, 100, seed=4)
    assert excerpt.size == 100
    assert_allclose(excerpt, np.tile(noise, 4)[offset:offset + 100])
    assert 0 <= offset <= 20


def test_crop_offset_is_seeded_and_in_range():
    offsets = [crop_offset(1000, 100, seed) for seed in range(200)]
    assert offsets == [crop_offset(1000, 100, seed) for seed in range(200)]
    assert min(offsets) >= 0 and max(offsets) <= 900
    assert len(set(offsets)) > 50
    assert crop_offset(100, 100, 7) == 0


def test_mixing_is_deterministic(rng):
    clean = Utterance(rng.standard_normal(200), 8000)
    noise = Utterance(rng.standard_normal(700), 8000)
    a = mix_at_snr(clean, noise, 5.0, seed=42)
    b = mix_at_snr(clean, noise, 5.0, seed=42)
    assert np.array_equal(a.samples, b.samples)
    assert a.meta == b.meta


def test_degenerate_inputs(rng):
    noise = Utterance(rng.standard_normal(100), 8000)
    with pytest.raises(DegenerateInputError):
        mix_at_snr(Utterance(np.zeros(50), 8000), noise, 0.0, seed=0)
    with pytest.raises(DegenerateInputError):
        mix_at_snr(Utterance(np.ones(50), 8000), Utterance(np.zeros(100), 8000), 0.0, seed=0)


def test_sample_rate_mismatch(rng):
    with pytest.raises(DataLoadingError):
        mix_at_snr(Utterance(rng.standard_normal(50), 8000), Utterance(rng.standard_normal(50), 16000), 0.0, seed=0)
