"""
Test-set evaluation, noise classification accuracy and single-file denoising.

Spectrogram dumps are plain text, one file per utterance and matrix:

    <dump_dir>/<set>/<utt_id>.w.txt    encoder output (noisy spectrogram)
    <dump_dir>/<set>/<utt_id>.y.txt    masked spectrogram fed to the decoder

First line "T N", then T rows of N space-separated values.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..autograd import no_grad
from ..data.corpus import load_mixture, utterance_id
from ..data.utterance import Utterance
from ..data.wav_io import read_wav, write_wav
from ..nn.checkpoint import load_checkpoint
from ..nn.model import ModelParams, forward
from ..utils.exceptions import ConfigError, DataLoadingError
from .metrics import segmental_snr, si_sdr

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['set', 'noisy_si_sdr', 'denoised_si_sdr', 'si_sdr_improvement', 'segsnr_improvement',
                  'accuracy', 'count']
UTTERANCE_COLUMNS = ['set', 'utt_id', 'class_id', 'predicted_class', 'noisy_si_sdr', 'denoised_si_sdr',
                     'noisy_segsnr', 'denoised_segsnr']
KEY_COLUMNS = ['set', 'utt_id']


@dataclass
class EvalReport:
    table: pd.DataFrame
    per_utterance: pd.DataFrame

    def row(self, set_name):
        rows = self.table[self.table['set'] == set_name]
        if rows.empty:
            raise KeyError(set_name)
        return rows.iloc[0]

    def to_text(self):
        return self.table.to_string(index=False, float_format=lambda v: f'{v:.3f}')


def write_spectrogram_dump(matrix, path):
    matrix = np.asarray(matrix)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    np.savetxt(path, matrix, fmt='%.17g', header=f'{matrix.shape[0]} {matrix.shape[1]}', comments='')


def read_spectrogram_dump(path):
    if not os.path.exists(path):
        raise DataLoadingError(f"Spectrogram dump not found at {path}")
    with open(path, 'r') as f:
        rows, cols = (int(v) for v in f.readline().split())
    matrix = np.loadtxt(path, skiprows=1, ndmin=2)
    if matrix.shape != (rows, cols):
        raise DataLoadingError(f"{path} declares {rows}x{cols} but holds {matrix.shape}.")
    return matrix


def score_utterance(params, utt, set_name, dump_dir=None):
    """Runs the model on one mixture and returns its per-utterance result row."""
    if utt.clean_ref is None:
        raise DataLoadingError(f"Utterance '{utt.name}' has no clean reference to score against.")
    with no_grad():
        out = forward(utt, params)
    denoised = out.denoised.data
    if dump_dir:
        base = os.path.join(dump_dir, set_name, utt.name)
        write_spectrogram_dump(out.spectrogram.data, base + '.w.txt')
        write_spectrogram_dump(out.masked_spec.data, base + '.y.txt')
    logger.debug(f"Scored {set_name}/{utt.name}")
    return {
        'set': set_name,
        'utt_id': utt.name,
        'class_id': utt.label,
        'predicted_class': out.predicted_class(),
        'noisy_si_sdr': si_sdr(utt.samples, utt.clean_ref),
        'denoised_si_sdr': si_sdr(denoised, utt.clean_ref),
        'noisy_segsnr': segmental_snr(utt.samples, utt.clean_ref),
        'denoised_segsnr': segmental_snr(denoised, utt.clean_ref),
    }


def evaluate_utterances(params, set_name, utterances, workers=1, dump_dir=None):
    """Per-utterance rows for `utterances`, in input order whatever the thread count."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda utt: score_utterance(params, utt, set_name, dump_dir), utterances))
    return pd.DataFrame(rows, columns=UTTERANCE_COLUMNS)


def _load_set(manifest, split, workers):
    rows = manifest.split(split)
    if rows.empty:
        raise DataLoadingError(f"Split '{split}' of manifest {manifest.path or manifest.root} is empty.")
    jobs = [(utterance_id(split, i), row) for i, row in rows.iterrows()]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda job: load_mixture(manifest, job[1], job[0]), jobs))


def load_external_scores(path):
    """CSV with columns set, utt_id and one column per externally computed metric."""
    if not os.path.exists(path):
        raise DataLoadingError(f"External scores file not found at {path}")
    scores = pd.read_csv(path, dtype={'set': str, 'utt_id': str})
    missing = set(KEY_COLUMNS) - set(scores.columns)
    if missing:
        raise DataLoadingError(f"External scores in {path} lack columns {sorted(missing)}.")
    if len(scores.columns) == len(KEY_COLUMNS):
        raise DataLoadingError(f"External scores in {path} contain no metric columns.")
    return scores


def summarise(per_utterance, set_names, extra_metrics=()):
    """One report row per set, in `set_names` order."""
    rows = []
    for name in set_names:
        part = per_utterance[per_utterance['set'] == name]
        has_classifier = part['predicted_class'].notna().all()
        row = {
            'set': name,
            'noisy_si_sdr': part['noisy_si_sdr'].mean(),
            'denoised_si_sdr': part['denoised_si_sdr'].mean(),
            'si_sdr_improvement': (part['denoised_si_sdr'] - part['noisy_si_sdr']).mean(),
            'segsnr_improvement': (part['denoised_segsnr'] - part['noisy_segsnr']).mean(),
            'accuracy': (part['predicted_class'] == part['class_id']).mean() if has_classifier else np.nan,
            'count': len(part),
        }
        for metric in extra_metrics:
            row[metric] = part[metric].mean()
        rows.append(row)
    return pd.DataFrame(rows, columns=REPORT_COLUMNS + list(extra_metrics))


def evaluate(params, test_sets, split='test', workers=1, dump_dir=None, external_scores=None):
    """
    Evaluates a model on one split of each (name, manifest) pair.

    Report rows follow the order of `test_sets`; utterances within a set follow
    manifest order. `external_scores` (a DataFrame from load_external_scores)
    is merged on (set, utt_id) and its metrics are averaged into the report.
    """
    names = [name for name, _ in test_sets]
    if len(set(names)) != len(names):
        raise ConfigError(f"Test set names must be unique, got {names}.")

    parts = []
    for name, manifest in test_sets:
        utterances = _load_set(manifest, split, workers)
        logger.info(f"Evaluating '{name}' ({len(utterances)} utterances)")
        parts.append(evaluate_utterances(params, name, utterances, workers, dump_dir))
    per_utterance = pd.concat(parts, ignore_index=True)

    extra = []
    if external_scores is not None:
        extra = [c for c in external_scores.columns if c not in KEY_COLUMNS]
        per_utterance = per_utterance.merge(external_scores, on=KEY_COLUMNS, how='left', validate='one_to_one')
        unmatched = int(per_utterance[extra].isna().all(axis=1).sum())
        if unmatched:
            logger.warning(f"{unmatched} evaluated utterances have no external scores")

    report = EvalReport(table=summarise(per_utterance, names, extra), per_utterance=per_utterance)
    logger.info(f"Evaluation finished:\n{report.to_text()}")
    return report


def classify_accuracy(params, manifest, split='test', workers=1):
    """Utterance-level noise classification accuracy (majority vote over frames)."""
    if not params.config.variant.has_classifier:
        raise ConfigError(f"Variant {params.config.variant.value} has no noise classifier.")
    utterances = _load_set(manifest, split, workers)

    def predict(utt):
        with no_grad():
            return forward(utt, params).predicted_class()

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        predictions = list(pool.map(predict, utterances))
    return float(np.mean([p == utt.label for p, utt in zip(predictions, utterances)]))


def denoise_file(in_path, checkpoint, out_path):
    """Enhances one WAV file; the output keeps the input's sample rate, length and encoding."""
    params = checkpoint if isinstance(checkpoint, ModelParams) else load_checkpoint(checkpoint).params
    noisy = read_wav(in_path)
    with no_grad():
        out = forward(noisy, params)
    enhanced = Utterance(samples=out.denoised.data, sample_rate=noisy.sample_rate, name=noisy.name)
    write_wav(enhanced, out_path, noisy.meta['encoding'])
    logger.info(f"Denoised {in_path} -> {out_path} ({len(noisy)} samples at {noisy.sample_rate} Hz)")
    return enhanced
