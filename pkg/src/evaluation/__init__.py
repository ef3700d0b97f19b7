from .evaluator import (EvalReport, classify_accuracy, denoise_file, evaluate, evaluate_utterances,
                        load_external_scores, read_spectrogram_dump, score_utterance, write_spectrogram_dump)
from .metrics import SI_SDR_CAP_DB, segmental_snr, si_sdr, utterance_accuracy
