"""
Procedural desk-scale corpus: harmonic pseudo-speech plus spectrally distinct
noise processes, one recipe per class id.

Everything is drawn from numpy Generators seeded by (seed, role, index), so a
fixed seed reproduces every WAV byte for byte.
"""
import logging
import math
import os

import numpy as np
import pandas as pd
from scipy import signal

from ..utils.exceptions import ConfigError
from .corpus import CorpusSpec
from .manifest import COLUMNS, MixtureManifest, write_manifest
from .mixing import crop_offset
from .utterance import Utterance
from .wav_io import write_wav

logger = logging.getLogger(__name__)

TARGET_RMS = 0.1
CLEAN_STREAM, NOISE_STREAM, MIX_STREAM = 0, 1, 2


def _normalise(x):
    rms = np.sqrt(np.mean(np.square(x)))
    return x * (TARGET_RMS / rms)


def _time(n, fs):
    return np.arange(n) / fs


def white_noise(rng, n, fs):
    return rng.standard_normal(n)


def lowpass_noise(rng, n, fs):
    b, a = signal.butter(4, 600.0, btype='low', fs=fs)
    return signal.lfilter(b, a, rng.standard_normal(n))


def modulated_tone(rng, n, fs):
    t = _time(n, fs)
    carrier = rng.uniform(300.0, 1500.0)
    rate = rng.uniform(2.0, 8.0)
    return (1.0 + 0.9 * np.sin(2 * np.pi * rate * t)) * np.sin(2 * np.pi * carrier * t + rng.uniform(0, 2 * np.pi))


def chirps(rng, n, fs):
    sweep = int(fs * rng.uniform(0.25, 0.5))
    one = signal.chirp(_time(sweep, fs), f0=200.0, t1=sweep / fs, f1=min(6000.0, 0.4 * fs), method='logarithmic')
    return np.tile(one, int(np.ceil(n / sweep)))[:n]


def babble_like(rng, n, fs):
    t = _time(n, fs)
    out = np.zeros(n)
    for _ in range(6):
        f0 = rng.uniform(90.0, 260.0)
        gate = (np.sin(2 * np.pi * rng.uniform(1.0, 4.0) * t + rng.uniform(0, 2 * np.pi)) > 0).astype(float)
        for k in range(1, 6):
            out += gate * np.sin(2 * np.pi * k * f0 * t) / k
    # Keeps excerpts between gated bursts from being silent.
    return out + 0.01 * rng.standard_normal(n)


def highpass_hiss(rng, n, fs):
    b, a = signal.butter(4, min(3000.0, 0.35 * fs), btype='high', fs=fs)
    return signal.lfilter(b, a, rng.standard_normal(n))


def mains_hum(rng, n, fs):
    t = _time(n, fs)
    base = rng.choice([50.0, 60.0])
    return sum(np.sin(2 * np.pi * k * base * t + rng.uniform(0, 2 * np.pi)) / k for k in range(1, 8))


def clicks(rng, n, fs):
    impulses = (rng.random(n) < 30.0 / fs) * rng.choice([-1.0, 1.0], size=n)
    decay = np.exp(-np.arange(int(0.004 * fs)) / (0.0008 * fs))
    out = signal.lfilter(decay, [1.0], impulses)
    # Guarantees energy even if no impulse fell in a short excerpt.
    out[0] += 1.0
    return out


def bandpass_noise(rng, n, fs):
    b, a = signal.butter(4, [1000.0, 2000.0], btype='band', fs=fs)
    return signal.lfilter(b, a, rng.standard_normal(n))


def brown_noise(rng, n, fs):
    return signal.lfilter([1.0], [1.0, -0.995], rng.standard_normal(n))


NOISE_RECIPES = (
    ('white', white_noise),
    ('lowpass', lowpass_noise),
    ('modulated_tone', modulated_tone),
    ('chirps', chirps),
    ('babble_like', babble_like),
    ('hiss', highpass_hiss),
    ('hum', mains_hum),
    ('clicks', clicks),
    ('bandpass', bandpass_noise),
    ('brown', brown_noise),
)


def pseudo_speech(rng, n, fs):
    """Voiced syllables: a gliding f0 with formant-shaped harmonics under a syllabic envelope."""
    t = _time(n, fs)
    f0 = rng.uniform(100.0, 220.0) * (1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t))
    phase = 2 * np.pi * np.cumsum(f0) / fs
    formants = (rng.uniform(500.0, 900.0), rng.uniform(1200.0, 2200.0))

    voiced = np.zeros(n)
    for k in range(1, int(0.45 * fs / 220.0)):
        freq = k * f0
        envelope = sum(np.exp(-0.5 * ((freq - f) / 250.0) ** 2) for f in formants) + 0.05
        voiced += envelope * np.sin(k * phase) / k

    syllables = np.zeros(n)
    start = int(rng.uniform(0.0, 0.05) * fs)
    while start < n:
        length = int(rng.uniform(0.15, 0.3) * fs)
        stop = min(n, start + length)
        syllables[start:stop] = signal.windows.hann(length)[:stop - start]
        start = stop + int(rng.uniform(0.03, 0.12) * fs)
    if not np.any(syllables > 0):
        syllables[:] = 1.0
    return voiced * syllables


def procedural_testset(classes, n_per_class, seed, out_dir, sample_rate=16000, duration=1.0,
                       split_counts=None, snr_min=0.0, snr_max=20.0, recipe_offset=0, clean_seed=None,
                       manifest_name='manifest.txt'):
    """
    Generates clean/noise WAVs under `out_dir` and a manifest of classes * n_per_class mixtures.

    Each mixture uses its own clean utterance, so splits never share a
    (clean, noise, offset) triple. `split_counts` is a (train, valid, test)
    tuple; by default 80/10/10 percent of classes * n_per_class. Explicit
    split counts set the corpus size themselves: mixtures cycle through the
    class ids and each class gets ceil(total / classes) noise files, so a
    test-only manifest such as (0, 0, 40) needs no matching n_per_class.
    `recipe_offset` shifts which noise recipe each class id uses and
    `clean_seed` draws a different set of pseudo-speakers, for mismatched
    test conditions.
    """
    if classes < 2:
        raise ConfigError(f"A procedural corpus needs at least 2 classes, got {classes}.")
    if classes > len(NOISE_RECIPES):
        raise ConfigError(f"Only {len(NOISE_RECIPES)} noise recipes exist, {classes} classes requested.")
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be positive, got {n_per_class}.")

    if split_counts is None:
        total = classes * n_per_class
        train = int(round(0.8 * total))
        valid = int(round(0.1 * total))
        split_counts = (train, valid, total - train - valid)
    spec = CorpusSpec(*split_counts, snr_min=snr_min, snr_max=snr_max, seed=seed)
    total = spec.total
    n_per_class = math.ceil(total / classes)

    n_clean = int(round(duration * sample_rate))
    n_noise = 2 * n_clean
    clean_seed = seed if clean_seed is None else clean_seed
    recipes = [NOISE_RECIPES[(c + recipe_offset) % len(NOISE_RECIPES)] for c in range(classes)]

    noise_paths = {}
    for class_id, (name, recipe) in enumerate(recipes):
        for j in range(n_per_class):
            rng = np.random.default_rng([seed, NOISE_STREAM, class_id, j])
            samples = _normalise(recipe(rng, n_noise, sample_rate))
            relative = os.path.join('noise', name, f'{name}_{j:04d}.wav')
            write_wav(Utterance(samples, sample_rate, label=class_id), os.path.join(out_dir, relative))
            noise_paths[class_id, j] = relative

    order = np.random.default_rng([seed, MIX_STREAM]).permutation(total)
    split_of = dict(zip(order, spec.split_sequence()))
    records = []
    for i in range(total):
        class_id, j = i % classes, i // classes
        rng = np.random.default_rng([clean_seed, CLEAN_STREAM, i])
        clean = _normalise(pseudo_speech(rng, n_clean, sample_rate))
        clean_relative = os.path.join('clean', f'utt_{i:05d}.wav')
        write_wav(Utterance(clean, sample_rate), os.path.join(out_dir, clean_relative))

        mix_rng = np.random.default_rng([seed, MIX_STREAM, i])
        snr = float(mix_rng.uniform(snr_min, snr_max))
        mix_seed = int(mix_rng.integers(2 ** 31 - 1))
        records.append({'clean_path': clean_relative, 'noise_path': noise_paths[class_id, j],
                        'class_id': class_id, 'snr_db': snr, 'seed': mix_seed,
                        'offset': crop_offset(n_noise, n_clean, mix_seed), 'split': split_of[i]})

    rows = pd.DataFrame.from_records(records, columns=COLUMNS)
    # Manifest lists train, then valid, then test.
    rows['split_rank'] = rows['split'].map({'train': 0, 'valid': 1, 'test': 2})
    rows = rows.sort_values(['split_rank'], kind='stable').drop(columns='split_rank').reset_index(drop=True)

    manifest = MixtureManifest(rows=rows, sample_rate=sample_rate, class_names=[name for name, _ in recipes],
                               root=os.path.abspath(out_dir))
    write_manifest(manifest, os.path.join(out_dir, manifest_name))
    logger.info(f"Procedural corpus with {classes} classes x {n_per_class} written to {out_dir}: {manifest.counts()}")
    return manifest
