"""
Mono WAV input/output: 16-bit PCM and 32-bit IEEE float.

The RIFF header is checked chunk by chunk before scipy decodes the samples,
so malformed, unsupported or multi-channel files fail with WavFormatError
instead of returning surprising arrays.
"""
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from ..utils.exceptions import DataLoadingError, WavFormatError
from .utterance import Utterance

logger = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003

ENCODINGS = {
    'pcm16': (WAVE_FORMAT_PCM, 16),
    'float32': (WAVE_FORMAT_IEEE_FLOAT, 32),
}
PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class WavHeader:
    riff_size: int
    format_tag: int
    channels: int
    sample_rate: int
    byte_rate: int
    block_align: int
    bits_per_sample: int
    data_offset: int
    data_size: int

    @property
    def encoding(self):
        for name, key in ENCODINGS.items():
            if key == (self.format_tag, self.bits_per_sample):
                return name
        return None

    @property
    def num_samples(self):
        return self.data_size // self.block_align


def read_wav_header(path):
    """Walks the RIFF chunks of a WAV file and returns its format and data location."""
    if not os.path.exists(path):
        raise DataLoadingError(f"WAV file not found at {path}")
    with open(path, 'rb') as f:
        blob = f.read()

    if len(blob) < 12 or blob[0:4] != b'RIFF' or blob[8:12] != b'WAVE':
        raise WavFormatError(f"{path} is not a RIFF/WAVE file.")
    riff_size = struct.unpack_from('<I', blob, 4)[0]

    fmt = None
    offset = 12
    while offset + 8 <= len(blob):
        chunk_id = blob[offset:offset + 4]
        chunk_size = struct.unpack_from('<I', blob, offset + 4)[0]
        body = offset + 8
        if chunk_id == b'fmt ':
            if chunk_size < 16 or body + 16 > len(blob):
                raise WavFormatError(f"{path} has a truncated fmt chunk.")
            fmt = struct.unpack_from('<HHIIHH', blob, body)
        elif chunk_id == b'data':
            if fmt is None:
                raise WavFormatError(f"{path} has a data chunk before its fmt chunk.")
            if body + chunk_size > len(blob):
                raise WavFormatError(f"{path} declares {chunk_size} data bytes but is truncated.")
            format_tag, channels, sample_rate, byte_rate, block_align, bits = fmt
            return WavHeader(riff_size, format_tag, channels, sample_rate, byte_rate, block_align,
                             bits, body, chunk_size)
        # Chunks are word aligned.
        offset = body + chunk_size + (chunk_size & 1)
    raise WavFormatError(f"{path} has no data chunk.")


def read_wav(path):
    """Reads a mono PCM16 or float32 WAV into an Utterance with samples in [-1, 1]."""
    header = read_wav_header(path)
    if header.channels != 1:
        raise WavFormatError(f"{path} has {header.channels} channels; only mono is supported.")
    if header.encoding is None:
        raise WavFormatError(
            f"{path} uses format tag {header.format_tag} with {header.bits_per_sample} bits; "
            f"supported encodings are {sorted(ENCODINGS)}.")

    try:
        sample_rate, data = wavfile.read(path)
    except ValueError as e:
        raise WavFormatError(f"Could not decode {path}: {e}")

    if header.encoding == 'pcm16':
        samples = data.astype(np.float64) / PCM16_SCALE
    else:
        samples = data.astype(np.float64)
    logger.debug(f"Read {samples.size} samples at {sample_rate} Hz ({header.encoding}) from {path}")
    return Utterance(samples=samples, sample_rate=int(sample_rate), name=os.path.splitext(os.path.basename(path))[0],
                     meta={'encoding': header.encoding})


def write_wav(utt, path, encoding='float32'):
    """Writes an Utterance as mono WAV; PCM16 output is rounded and clipped to 16 bits."""
    if encoding not in ENCODINGS:
        raise WavFormatError(f"Unsupported WAV encoding '{encoding}'. Choose one of {sorted(ENCODINGS)}.")
    samples = np.asarray(utt.samples, dtype=np.float64)

    if encoding == 'pcm16':
        scaled = np.round(samples * PCM16_SCALE)
        clipped = np.clip(scaled, -PCM16_SCALE, PCM16_SCALE - 1)
        if np.any(clipped != scaled):
            logger.warning(f"Clipping {int(np.sum(clipped != scaled))} samples while writing {path}")
        data = clipped.astype('<i2')
    else:
        data = samples.astype('<f4')

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    wavfile.write(path, int(utt.sample_rate), data)
    logger.debug(f"Wrote {samples.size} samples ({encoding}) to {path}")
