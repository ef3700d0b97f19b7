from dataclasses import dataclass

import numpy as np

from ..utils.exceptions import ContractError, ShapeError

@dataclass(frozen=True)
class SegmentBatch:
    """T overlapping segments of L samples plus what overlap-add needs to undo the framing."""
    frames: np.ndarray
    hop: int
    length: int

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def frame_len(self):
        return self.frames.shape[1]

    def prefix(self, num_frames):
        """The first `num_frames` segments, as a streaming system would have seen them."""
        if not 1 <= num_frames <= self.num_frames:
            raise ContractError(f"Prefix of {num_frames} frames out of range 1..{self.num_frames}.")
        covered = (num_frames - 1) * self.hop + self.frame_len
        return SegmentBatch(self.frames[:num_frames], self.hop, min(self.length, covered))


def segment_waveform(samples, frame_len, hop):
    """
    Splits a waveform into overlapping frames of `frame_len` samples every `hop` samples.

    The tail is zero-padded so that the last frame is complete.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise ShapeError(f"Expected a non-empty mono waveform, got shape {samples.shape}.")
    if hop < 1 or hop > frame_len:
        raise ContractError(f"hop must lie in [1, {frame_len}], got {hop}.")

    length = samples.size
    num_frames = 1 + max(0, int(np.ceil((length - frame_len) / hop)))
    padded_len = (num_frames - 1) * hop + frame_len
    padded = np.zeros(padded_len)
    padded[:length] = samples

    index = np.arange(num_frames)[:, None] * hop + np.arange(frame_len)[None, :]
    return SegmentBatch(frames=padded[index], hop=hop, length=length)
