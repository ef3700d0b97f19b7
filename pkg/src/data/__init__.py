from .corpus import (CorpusSpec, load_mixture, load_split, render_mixtures, synthesize_corpus,
                     utterance_id)
from .manifest import MixtureManifest, read_manifest, write_manifest
from .mixing import mix_at_snr, snr_db
from .procedural import NOISE_RECIPES, procedural_testset
from .segmentation import SegmentBatch, segment_waveform
from .utterance import Utterance
from .wav_io import read_wav, read_wav_header, write_wav
