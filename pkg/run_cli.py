import argparse
import logging
import os
import sys

from src.main import run_ablation, run_denoise, run_eval, run_synth, run_train
from src.utils.config_loader import load_config, resolve_run_config
from src.utils.logging_config import setup_logging
from src.utils.exceptions import DenoiserError, exit_code_for

DEFAULT_CONFIG = 'config.yaml'


def _int_list(text):
    return [int(v) for v in text.split(',') if v]


def build_parser():
    parser = argparse.ArgumentParser(description="Noise-aware attention speech enhancement: corpus synthesis, "
                                                 "training, evaluation and denoising.")
    parser.add_argument(
        '--config', type=str, default=None, help=f'Path to the configuration file (default: {DEFAULT_CONFIG} if present)'
    )
    parser.add_argument(
        '--output-dir', type=str, help='Path to the output directory (overrides config file and DENOISER_OUTPUT_DIR)'
    )
    parser.add_argument(
        '--log-level', type=str, choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
        help='Set the logging level (overrides config file setting)'
    )
    parser.add_argument('--workers', type=int, help='Worker threads for data loading and evaluation')
    commands = parser.add_subparsers(dest='command', required=True)

    synth = commands.add_parser('synth', help='Synthesise a mixture corpus and its manifest')
    synth.add_argument('--procedural', action='store_true', default=None, help='Generate procedural speech and noise')
    synth.add_argument('--clean-dir', help='Directory of clean WAV utterances')
    synth.add_argument('--noise-dir', help='Directory with one sub-directory of WAVs per noise class')
    synth.add_argument('--classes', type=int, help='Number of procedural noise classes')
    synth.add_argument('--per-class', type=int, help='Procedural mixtures per noise class')
    synth.add_argument('--train', type=int, help='Mixtures in the train split')
    synth.add_argument('--valid', type=int, help='Mixtures in the valid split')
    synth.add_argument('--test', type=int, help='Mixtures in the test split')
    synth.add_argument('--snr-min', type=float, help='Lowest mixing SNR in dB')
    synth.add_argument('--snr-max', type=float, help='Highest mixing SNR in dB')
    synth.add_argument('--duration', type=float, help='Procedural utterance length in seconds')
    synth.add_argument('--sample-rate', type=int, help='Procedural sample rate in Hz')
    synth.add_argument('--seed', type=int, help='Corpus seed')
    synth.add_argument('--clean-seed', type=int, help='Seed of the procedural speakers (unseen-speaker test sets)')
    synth.add_argument('--recipe-offset', type=int, help='Shift of the noise recipe per class (unseen-noise test sets)')
    synth.add_argument('--render', action='store_true', default=None, help='Also write every mixture as WAV')
    synth.add_argument('--out', help='Corpus directory (manifest.txt is written there)')

    def add_model_flags(sub):
        sub.add_argument('--manifest', help='Mixture manifest')
        sub.add_argument('--variant', help='pure-lstm | att-lstm | ca-att-lstm1 | ca-att-lstm2')
        sub.add_argument('--window', type=int, help='Causal attention window w')

    train = commands.add_parser('train', help='Train a model on a manifest')
    add_model_flags(train)
    train.add_argument('--alpha', type=float, help='Weight of the noise classification loss')
    train.add_argument('--epochs', type=int, help='Maximum number of epochs')
    train.add_argument('--patience', type=int, help='Early stopping patience in epochs')
    train.add_argument('--lr-start', type=float, help='Learning rate of the first epoch')
    train.add_argument('--lr-end', type=float, help='Learning rate of the last epoch')
    train.add_argument('--batch-size', type=int, help='Utterances per optimiser step')
    train.add_argument('--seed', type=int, help='Initialisation and shuffling seed')
    train.add_argument('--resume', action='store_true', help='Continue from last.ckpt in the output directory')

    evaluate = commands.add_parser('eval', help='Evaluate a checkpoint on one or more manifests')
    add_model_flags(evaluate)
    evaluate.add_argument('manifests', nargs='*', help='Test manifests, reported in this order')
    evaluate.add_argument('--checkpoint', help='Checkpoint (default: <output_dir>/best.ckpt)')
    evaluate.add_argument('--split', default='test', choices=['train', 'valid', 'test'])
    evaluate.add_argument('--dump-spectrograms', action='store_true', help='Write w and y matrices per utterance')
    evaluate.add_argument('--plot', action='store_true', help='Plot spectrogram comparisons (implies dumps)')
    evaluate.add_argument('--external-scores', help='CSV of externally computed metrics (set, utt_id, ...)')
    evaluate.add_argument('--precision', choices=['float64', 'float32'])

    denoise = commands.add_parser('denoise', help='Enhance a single WAV file')
    add_model_flags(denoise)
    denoise.add_argument('input', help='Noisy WAV file')
    denoise.add_argument('output', help='Where to write the enhanced WAV')
    denoise.add_argument('--checkpoint', help='Checkpoint (default: <output_dir>/best.ckpt)')
    denoise.add_argument('--precision', choices=['float64', 'float32'])

    ablate = commands.add_parser('ablate', help='Compare variants and attention windows over several seeds')
    ablate.add_argument('--manifest', help='Mixture manifest')
    ablate.add_argument('--variants', default='pure-lstm,att-lstm,ca-att-lstm1,ca-att-lstm2',
                        help='Comma-separated variants')
    ablate.add_argument('--windows', type=_int_list, default=[5], help='Comma-separated window sizes')
    ablate.add_argument('--seeds', type=_int_list, default=[0, 1, 2], help='Comma-separated seeds')
    ablate.add_argument('--epochs', type=int, help='Maximum number of epochs per run')
    return parser


def overrides_from_args(args):
    """Maps the flags that were given onto the configuration file's sections."""
    get = lambda name: getattr(args, name, None)
    data = {'manifest': get('manifest'), 'clean_dir': get('clean_dir'), 'noise_dir': get('noise_dir'),
            'classes': get('classes'), 'per_class': get('per_class'), 'train': get('train'),
            'valid': get('valid'), 'test': get('test'), 'snr_min': get('snr_min'), 'snr_max': get('snr_max'),
            'duration': get('duration'), 'sample_rate': get('sample_rate'), 'clean_seed': get('clean_seed'),
            'recipe_offset': get('recipe_offset'), 'render': get('render')}
    if args.command == 'synth':
        data['seed'] = get('seed')
        if get('procedural'):
            data['procedural'] = True
        elif get('clean_dir') or get('noise_dir'):
            data['procedural'] = False
        if get('out'):
            data['corpus_dir'] = get('out')
            data['manifest'] = os.path.join(get('out'), 'manifest.txt')
    training = {'alpha': get('alpha'), 'max_epochs': get('epochs'), 'patience': get('patience'),
                'lr_start': get('lr_start'), 'lr_end': get('lr_end'), 'batch_size': get('batch_size')}
    if args.command == 'train':
        training['seed'] = get('seed')
    return {
        'model': {'variant': get('variant'), 'window': get('window'), 'precision': get('precision')},
        'training': training,
        'data': data,
        'global': {'output_dir': args.output_dir, 'workers': args.workers},
        'logging': {'level': args.log_level},
    }


def main(argv=None):
    """
    Main entry point for the command-line interface. Returns the process exit code.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors; usage errors share the config exit code.
        return 0 if e.code in (0, None) else 1

    try:
        config_path = args.config or (DEFAULT_CONFIG if os.path.exists(DEFAULT_CONFIG) else None)
        file_config = load_config(config_path) if config_path else {}
        run_config = resolve_run_config(file_config, overrides_from_args(args))

        if not os.path.exists(run_config.output_dir):
            os.makedirs(run_config.output_dir)
        log_file_path = os.path.join(run_config.output_dir, run_config.log_file) if run_config.log_file else None
        setup_logging(run_config.log_level, log_file_path, append=getattr(args, 'resume', False))

        if args.command == 'synth':
            manifest = run_synth(run_config)
            counts = manifest.counts()
            print(f"{manifest.path}\t" + "\t".join(f"{split}={n}" for split, n in counts.items()))
        elif args.command == 'train':
            run_train(run_config, resume=args.resume)
        elif args.command == 'eval':
            report = run_eval(run_config, args.checkpoint, args.manifests, args.split,
                              dump=args.dump_spectrograms, plot=args.plot, external_scores=args.external_scores)
            print(report.to_text())
        elif args.command == 'denoise':
            run_denoise(run_config, args.input, args.output, args.checkpoint)
        elif args.command == 'ablate':
            table, _ = run_ablation(run_config, args.variants.split(','), args.windows, args.seeds)
            print(table.to_string(index=False))
        return 0

    except DenoiserError as e:
        logging.critical(f"{args.command} failed: {e}")
        return exit_code_for(e)
    except Exception as e:
        logging.critical(f"An unexpected error occurred: {e}", exc_info=True)
        return 1

if __name__ == "__main__":
    sys.exit(main())
