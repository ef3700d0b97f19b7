import logging

import numpy as np

from ..utils.exceptions import DataLoadingError, DegenerateInputError
from .utterance import Utterance

logger = logging.getLogger(__name__)

PEAK_LIMIT = 0.99


def mean_power(samples):
    return float(np.mean(np.square(samples)))


def snr_db(signal, noise):
    """10 log10 of the signal-to-noise mean power ratio."""
    return 10.0 * np.log10(mean_power(signal) / mean_power(noise))


def tiled_length(noise_len, clean_len):
    """Length of the noise after tiling it end-to-end until it covers the clean signal."""
    if noise_len >= clean_len:
        return noise_len
    return noise_len * int(np.ceil(clean_len / noise_len))


def crop_offset(noise_len, clean_len, seed):
    """Seeded start index of the noise excerpt laid under the clean signal."""
    rng = np.random.default_rng(seed)
    return int(rng.integers(0, tiled_length(noise_len, clean_len) - clean_len + 1))


def fit_noise(noise, clean_len, seed):
    """Tiles noise shorter than the clean signal, then crops a seeded excerpt. Returns (excerpt, offset)."""
    offset = crop_offset(noise.size, clean_len, seed)
    if noise.size < clean_len:
        noise = np.tile(noise, tiled_length(noise.size, clean_len) // noise.size)
    return noise[offset:offset + clean_len], offset


def mix_at_snr(clean, noise, snr_db_value, seed, peak_limit=PEAK_LIMIT):
    """
    Adds noise to clean speech at the requested SNR.

    The noise gain is sqrt(P_clean / (P_noise * 10^(snr/10))) with P the mean
    power over the overlapped excerpt. The mixture is then peak-normalised to
    `peak_limit` if needed, with the same factor applied to the clean reference.
    """
    if clean.sample_rate != noise.sample_rate:
        raise DataLoadingError(
            f"Sample rates differ: clean {clean.sample_rate} Hz, noise {noise.sample_rate} Hz.")
    speech = clean.samples
    p_clean = mean_power(speech)
    if p_clean == 0.0:
        raise DegenerateInputError(f"Clean signal '{clean.name}' is silent; SNR is undefined.")
    if noise.samples.size == 0:
        raise DegenerateInputError(f"Noise signal '{noise.name}' is empty.")

    excerpt, offset = fit_noise(noise.samples, speech.size, seed)
    p_noise = mean_power(excerpt)
    if p_noise == 0.0:
        raise DegenerateInputError(f"Noise excerpt of '{noise.name}' at offset {offset} is silent.")

    gain = float(np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db_value / 10.0))))
    mixture = speech + gain * excerpt

    peak = float(np.max(np.abs(mixture)))
    normalisation = peak_limit / peak if peak > peak_limit else 1.0
    logger.debug(f"Mixed '{clean.name}' + '{noise.name}' at {snr_db_value:.2f} dB "
                 f"(gain {gain:.4f}, offset {offset}, scale {normalisation:.4f})")
    return Utterance(samples=mixture * normalisation, sample_rate=clean.sample_rate, label=noise.label,
                     clean_ref=speech * normalisation, name=clean.name,
                     meta={'gain': gain, 'offset': offset, 'scale': normalisation, 'snr_db': float(snr_db_value)})
