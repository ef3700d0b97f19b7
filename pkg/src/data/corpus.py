"""
Corpus synthesis from user WAV collections.

Expected layout:

    <clean_dir>/*.wav                      clean utterances
    <noise_dir>/<class_name>/*.wav         one directory per noise class

Class ids follow the sorted class directory names. Each manifest row draws a
clean file, a class, a noise file of that class, an SNR and a mixing seed
from its own RNG stream seeded by (corpus seed, row index, attempt).
"""
import glob
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..utils.exceptions import ConfigError, DataLoadingError
from .manifest import COLUMNS, SPLITS, MixtureManifest, write_manifest
from .mixing import crop_offset, mix_at_snr
from .utterance import Utterance
from .wav_io import read_wav, read_wav_header, write_wav

logger = logging.getLogger(__name__)

MAX_DRAWS_PER_ROW = 64


@dataclass(frozen=True)
class CorpusSpec:
    train: int = 0
    valid: int = 0
    test: int = 0
    snr_min: float = 0.0
    snr_max: float = 20.0
    seed: int = 0

    def __post_init__(self):
        for split in SPLITS:
            if getattr(self, split) < 0:
                raise ConfigError(f"Split size '{split}' must be non-negative.")
        if self.total == 0:
            raise ConfigError("Corpus specification requests zero mixtures.")
        if self.snr_min > self.snr_max:
            raise ConfigError(f"snr_min ({self.snr_min}) exceeds snr_max ({self.snr_max}).")

    @property
    def total(self):
        return self.train + self.valid + self.test

    def split_sequence(self):
        return [split for split in SPLITS for _ in range(getattr(self, split))]


def list_wavs(directory):
    return sorted(glob.glob(os.path.join(directory, '*.wav')))


def discover_noise_classes(noise_dir):
    """Sorted (class_name, [wav paths]) pairs; every class directory must hold a WAV."""
    if not os.path.isdir(noise_dir):
        raise DataLoadingError(f"Noise directory not found at {noise_dir}")
    classes = []
    for name in sorted(os.listdir(noise_dir)):
        path = os.path.join(noise_dir, name)
        if not os.path.isdir(path):
            continue
        files = list_wavs(path)
        if not files:
            raise DataLoadingError(f"Noise class directory {path} contains no WAV files.")
        classes.append((name, files))
    if not classes:
        raise DataLoadingError(f"No noise class directories found under {noise_dir}")
    return classes


def _num_samples(path, sample_rate):
    header = read_wav_header(path)
    if header.sample_rate != sample_rate:
        raise DataLoadingError(f"{path} is sampled at {header.sample_rate} Hz, corpus uses {sample_rate} Hz.")
    return header.num_samples


def synthesize_corpus(clean_dir, noise_dir, spec, out_path):
    """Draws mixture rows for the requested split sizes and writes the manifest to `out_path`."""
    clean_files = list_wavs(clean_dir)
    if not clean_files:
        raise DataLoadingError(f"No clean WAV files found in {clean_dir}")
    classes = discover_noise_classes(noise_dir)
    sample_rate = read_wav_header(clean_files[0]).sample_rate
    manifest_root = os.path.dirname(os.path.abspath(out_path))

    def relative(path):
        return os.path.relpath(os.path.abspath(path), manifest_root)

    lengths = {}

    def length_of(path):
        if path not in lengths:
            lengths[path] = _num_samples(path, sample_rate)
        return lengths[path]

    records, owner = [], {}
    for index, split in enumerate(spec.split_sequence()):
        for attempt in range(MAX_DRAWS_PER_ROW):
            rng = np.random.default_rng([spec.seed, index, attempt])
            clean = clean_files[rng.integers(len(clean_files))]
            class_id = int(rng.integers(len(classes)))
            noise_files = classes[class_id][1]
            noise = noise_files[rng.integers(len(noise_files))]
            snr = float(rng.uniform(spec.snr_min, spec.snr_max))
            seed = int(rng.integers(2 ** 31 - 1))
            offset = crop_offset(length_of(noise), length_of(clean), seed)
            triple = (relative(clean), relative(noise), offset)
            if owner.setdefault(triple, split) == split:
                break
        else:
            raise DataLoadingError(
                f"Could not draw row {index} without reusing a (clean, noise, offset) triple of another split; "
                f"the corpus is too small for the requested split sizes.")
        records.append({'clean_path': triple[0], 'noise_path': triple[1], 'class_id': class_id,
                        'snr_db': snr, 'seed': seed, 'offset': offset, 'split': split})

    manifest = MixtureManifest(rows=pd.DataFrame.from_records(records, columns=COLUMNS), sample_rate=sample_rate,
                               class_names=[name for name, _ in classes], root=manifest_root)
    write_manifest(manifest, out_path)
    logger.info(f"Synthesised corpus: {manifest.counts()} over {len(classes)} noise classes")
    return manifest


def utterance_id(split, index):
    return f'{split}-{index:05d}'


def load_mixture(manifest, row, name=''):
    """Re-creates a mixture from its manifest row (deterministic)."""
    clean = read_wav(manifest.resolve(row['clean_path']))
    noise = read_wav(manifest.resolve(row['noise_path']))
    noise.label = int(row['class_id'])
    mixture = mix_at_snr(clean, noise, float(row['snr_db']), int(row['seed']))
    mixture.name = name or clean.name
    return mixture


def load_split(manifest, split):
    """All mixtures of one split, in manifest order."""
    rows = manifest.split(split)
    if rows.empty:
        raise DataLoadingError(f"Split '{split}' of manifest {manifest.path or manifest.root} is empty.")
    return [load_mixture(manifest, row, utterance_id(split, i)) for i, row in rows.iterrows()]


def render_mixtures(manifest, out_dir, workers=1, encoding='float32'):
    """Writes <out_dir>/<split>/<id>.wav and <id>.clean.wav for every row, in parallel per row."""
    jobs = []
    for split in SPLITS:
        for i, row in manifest.split(split).iterrows():
            jobs.append((split, utterance_id(split, i), row))

    def render(job):
        split, name, row = job
        mixture = load_mixture(manifest, row, name)
        write_wav(mixture, os.path.join(out_dir, split, f'{name}.wav'), encoding)
        clean = Utterance(samples=mixture.clean_ref, sample_rate=mixture.sample_rate, name=name)
        write_wav(clean, os.path.join(out_dir, split, f'{name}.clean.wav'), encoding)
        return name

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        written = list(pool.map(render, jobs))
    logger.info(f"Rendered {len(written)} mixtures to {out_dir}")
    return written
