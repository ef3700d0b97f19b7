import logging
import os

import pandas as pd

from .autograd import set_default_dtype
from .data.corpus import CorpusSpec, render_mixtures, synthesize_corpus
from .data.manifest import read_manifest
from .data.procedural import procedural_testset
from .evaluation.evaluator import denoise_file, evaluate, load_external_scores, read_spectrogram_dump
from .nn.checkpoint import load_checkpoint
from .nn.model import Variant
from .reporting.reporter import save_ablation_report, save_eval_report, save_output
from .training.trainer import train_loop
from .utils.config_loader import save_run_config
from .utils.exceptions import ConfigError
from .visualization.plotter import plot_ablation, plot_spectrogram_comparison, plot_training_curves

logger = logging.getLogger(__name__)

ORDERING_TOLERANCE_DB = 0.25
ORDERED_VARIANTS = (Variant.PURE_LSTM, Variant.ATT_LSTM, Variant.CA_ATT_LSTM2)


def _ensure_dir(path):
    if not os.path.exists(path):
        os.makedirs(path)
        logger.info(f"Created output directory at: {path}")


def run_synth(run_config):
    """
    Builds a corpus manifest (procedural or from WAV directories) and optionally renders the mixtures.
    """
    logger.info("Starting corpus synthesis...")
    data = run_config.data
    manifest_path = data.manifest_path
    corpus_dir = os.path.dirname(manifest_path) or '.'
    _ensure_dir(run_config.output_dir)
    save_run_config(run_config)

    if data.procedural:
        counts = None if data.train is None else (data.train, data.valid, data.test)
        manifest = procedural_testset(
            data.classes, data.per_class, data.seed, corpus_dir, sample_rate=data.sample_rate,
            duration=data.duration, split_counts=counts, snr_min=data.snr_min, snr_max=data.snr_max,
            recipe_offset=data.recipe_offset, clean_seed=data.clean_seed,
            manifest_name=os.path.basename(manifest_path))
    else:
        if not data.clean_dir or not data.noise_dir:
            raise ConfigError("Synthesis from WAV files needs data.clean_dir and data.noise_dir (or --procedural).")
        spec = CorpusSpec(train=data.train if data.train is not None else 100,
                          valid=data.valid if data.valid is not None else 20,
                          test=data.test if data.test is not None else 20,
                          snr_min=data.snr_min, snr_max=data.snr_max, seed=data.seed)
        manifest = synthesize_corpus(data.clean_dir, data.noise_dir, spec, manifest_path)

    if data.render:
        render_mixtures(manifest, os.path.join(corpus_dir, 'mixtures'), run_config.workers, data.encoding)
    logger.info("--- Corpus synthesis finished ---")
    return manifest


def run_train(run_config, resume=False, on_epoch_end=None):
    """Trains the configured variant and writes checkpoints, metrics.csv and the training curves."""
    logger.info(f"Starting training of {run_config.model.variant.value}...")
    _ensure_dir(run_config.output_dir)
    save_run_config(run_config)
    manifest = read_manifest(run_config.data.manifest_path)

    result = train_loop(manifest, run_config.model, run_config.training, run_config.output_dir,
                        resume=resume, workers=run_config.workers, on_epoch_end=on_epoch_end)
    plot_training_curves(result.history, f"Training of {run_config.model.variant.value}",
                         os.path.join(run_config.output_dir, 'training_curves.png'))
    logger.info(f"--- Training finished: best epoch {result.best_epoch}, "
                f"valid loss {result.best_valid_loss:.6g} ---")
    return result


def load_model(run_config, checkpoint_path=None):
    """Loads a checkpoint at the run's precision; its model configuration must match the run's."""
    set_default_dtype(run_config.precision)
    checkpoint_path = checkpoint_path or os.path.join(run_config.output_dir, 'best.ckpt')
    params = load_checkpoint(checkpoint_path).params
    if params.config != run_config.model:
        theirs, ours = params.config.to_dict(), run_config.model.to_dict()
        diff = {key: (theirs[key], ours[key]) for key in ours if theirs[key] != ours[key]}
        raise ConfigError(f"Checkpoint {checkpoint_path} does not match the model configuration "
                          f"(checkpoint, run): {diff}")
    return params


def report_set_names(manifest_paths):
    """Report names from manifest file names, made unique by position where they collide."""
    stems = [os.path.splitext(os.path.basename(path))[0] for path in manifest_paths]
    return [stem if stems.count(stem) == 1 else f'{stem}-{i}' for i, stem in enumerate(stems)]


def run_eval(run_config, checkpoint_path=None, manifest_paths=None, split='test', dump=False, plot=False,
             external_scores=None):
    """Evaluates a checkpoint on each manifest, in argument order, and writes the report files."""
    logger.info("Starting evaluation...")
    _ensure_dir(run_config.output_dir)
    save_run_config(run_config)
    params = load_model(run_config, checkpoint_path)

    manifest_paths = manifest_paths or [run_config.data.manifest_path]
    test_sets = list(zip(report_set_names(manifest_paths), [read_manifest(p) for p in manifest_paths]))
    dump_dir = os.path.join(run_config.output_dir, 'spectrograms') if (dump or plot) else None
    scores = load_external_scores(external_scores) if external_scores else None

    report = evaluate(params, test_sets, split=split, workers=run_config.workers, dump_dir=dump_dir,
                      external_scores=scores)

    plot_paths, plotted_sets = {}, set()
    if plot:
        for name, utt_id in report.per_utterance[['set', 'utt_id']].itertuples(index=False):
            base = os.path.join(dump_dir, name, utt_id)
            figure = base + '.png'
            plot_spectrogram_comparison(read_spectrogram_dump(base + '.w.txt'), read_spectrogram_dump(base + '.y.txt'),
                                        f"{name} / {utt_id}", figure)
            if name not in plotted_sets:
                plotted_sets.add(name)
                plot_paths[f"{name} / {utt_id}"] = os.path.relpath(figure, run_config.output_dir)

    save_eval_report(report, run_config.output_dir, run_config.to_dict(), plot_paths)
    logger.info("--- Evaluation finished ---")
    return report


def run_denoise(run_config, in_path, out_path, checkpoint_path=None):
    logger.info(f"Denoising {in_path}...")
    params = load_model(run_config, checkpoint_path)
    return denoise_file(in_path, params, out_path)


def ordering_deviations(table, tolerance=ORDERING_TOLERANCE_DB):
    """
    Per window, checks Pure-LSTM <= Att-LSTM <= CA-Att-LSTM2 on mean SI-SDR, allowing each
    step to fall short by `tolerance` dB. Returns one message per violated step.
    """
    present = [v.value for v in ORDERED_VARIANTS if v.value in table.columns]
    notes = []
    for _, row in table.iterrows():
        for lower, upper in zip(present, present[1:]):
            gap = row[upper] - row[lower]
            if gap < -tolerance:
                notes.append(f"w={int(row['window'])}: {upper} trails {lower} by {-gap:.2f} dB")
    return notes


def run_ablation(run_config, variants, windows, seeds):
    """
    Trains every variant for every window and seed on one manifest and tabulates mean
    test SI-SDR (rows: window, columns: variant). Pure-LSTM has no attention window,
    so it is trained once per seed and repeated on every row.
    """
    logger.info(f"Starting ablation: variants {variants}, windows {windows}, seeds {seeds}")
    variants = [Variant.parse(v) for v in variants]
    if not variants or not windows or not seeds:
        raise ConfigError("Ablation needs at least one variant, one window and one seed.")
    _ensure_dir(run_config.output_dir)
    save_run_config(run_config)
    manifest = read_manifest(run_config.data.manifest_path)

    runs, cache = [], {}
    for seed in seeds:
        for window in windows:
            for variant in variants:
                key = (variant, None if variant is Variant.PURE_LSTM else window, seed)
                if key not in cache:
                    model_cfg = run_config.with_model(variant=variant, window=window).model
                    alpha = run_config.training.alpha if variant.has_classifier else 0.0
                    train_cfg = run_config.with_training(alpha=alpha, seed=seed).training
                    run_dir = os.path.join(run_config.output_dir, 'runs', f'{variant.value}-w{window}-s{seed}')
                    result = train_loop(manifest, model_cfg, train_cfg, run_dir, workers=run_config.workers)
                    report = evaluate(result.params, [('test', manifest)], workers=run_config.workers)
                    cache[key] = float(report.row('test')['denoised_si_sdr'])
                runs.append({'variant': variant.value, 'window': window, 'seed': seed, 'si_sdr': cache[key]})

    runs = pd.DataFrame(runs)
    table = runs.pivot_table(index='window', columns='variant', values='si_sdr', aggfunc='mean')
    table = table.reindex(columns=[v.value for v in variants]).reset_index()
    table.columns.name = None
    notes = ordering_deviations(table)
    table['ordering_ok'] = [not any(note.startswith(f"w={w}:") for note in notes) for w in table['window']]
    for note in notes:
        logger.warning(f"Variant ordering deviation: {note}")

    save_output(runs, os.path.join(run_config.output_dir, 'ablation_runs.csv'))
    save_ablation_report(table, run_config.output_dir, run_config.to_dict(), notes)
    plot_ablation(table, [v.value for v in variants], os.path.join(run_config.output_dir, 'ablation.png'))
    logger.info(f"--- Ablation finished ---\n{table.to_string(index=False)}")
    return table, notes
