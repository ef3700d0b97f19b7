"""
Objective speech quality measures computed on numpy waveforms.
"""
import numpy as np

from ..nn.model import utterance_class
from ..utils.exceptions import ContractError, DegenerateInputError

SI_SDR_CAP_DB = 100.0
SEGSNR_FRAME_LEN = 256
SEGSNR_FLOOR_DB = -10.0
SEGSNR_CEIL_DB = 35.0
SILENCE_THRESHOLD_DB = -40.0


def _pair(estimate, reference):
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if estimate.shape != reference.shape or estimate.ndim != 1:
        raise ContractError(f"Estimate {estimate.shape} and reference {reference.shape} must be equal-length vectors.")
    return estimate, reference


def si_sdr(estimate, reference, cap_db=SI_SDR_CAP_DB):
    """
    Scale-invariant signal-to-distortion ratio in dB.

    The reference is scaled by <estimate, reference> / ||reference||^2 and the
    ratio of its energy to the residual's is returned, clipped to
    [-cap_db, cap_db] so exact (or orthogonal) estimates stay finite.
    """
    estimate, reference = _pair(estimate, reference)
    ref_energy = np.dot(reference, reference)
    if ref_energy == 0.0:
        raise DegenerateInputError("SI-SDR is undefined for a silent reference.")
    target = (np.dot(estimate, reference) / ref_energy) * reference
    residual = estimate - target
    target_energy = np.dot(target, target)
    residual_energy = np.dot(residual, residual)
    if target_energy == 0.0:
        return -cap_db
    if residual_energy == 0.0:
        return cap_db
    return float(np.clip(10.0 * np.log10(target_energy / residual_energy), -cap_db, cap_db))


def segmental_snr(estimate, reference, frame_len=SEGSNR_FRAME_LEN, floor_db=SEGSNR_FLOOR_DB,
                  ceil_db=SEGSNR_CEIL_DB, silence_db=SILENCE_THRESHOLD_DB):
    """
    Mean per-frame SNR over non-overlapping frames, each clamped to [floor_db, ceil_db].

    Frames whose reference energy is more than `silence_db` below the loudest
    frame (or zero) are skipped. A frame where the estimate is silent scores
    `floor_db`, as SI-SDR scores a silent estimate at its floor. A trailing
    partial frame is dropped unless the signal is shorter than one frame.
    """
    estimate, reference = _pair(estimate, reference)
    if frame_len < 1:
        raise ContractError(f"frame_len must be positive, got {frame_len}.")
    num_frames = max(1, reference.size // frame_len)
    usable = min(reference.size, num_frames * frame_len)
    ref_frames = reference[:usable].reshape(num_frames, -1)
    err_frames = (reference - estimate)[:usable].reshape(num_frames, -1)
    est_frames = estimate[:usable].reshape(num_frames, -1)

    ref_energy = np.sum(np.square(ref_frames), axis=1)
    err_energy = np.sum(np.square(err_frames), axis=1)
    loudest = ref_energy.max()
    if loudest == 0.0:
        raise DegenerateInputError("Segmental SNR is undefined for an all-silent reference.")
    active = (ref_energy > 0.0) & (ref_energy >= loudest * 10.0 ** (silence_db / 10.0))

    with np.errstate(divide='ignore'):
        frame_snr = 10.0 * np.log10(ref_energy[active] / err_energy[active])
    silent_estimate = ~np.any(est_frames[active], axis=1)
    frame_snr = np.where(silent_estimate, floor_db, frame_snr)
    return float(np.mean(np.clip(frame_snr, floor_db, ceil_db)))


def utterance_accuracy(logits_per_utterance, labels):
    """Fraction of utterances whose majority-vote class equals the label."""
    if len(logits_per_utterance) != len(labels) or len(labels) == 0:
        raise ContractError(f"Need one label per utterance, got {len(logits_per_utterance)} and {len(labels)}.")
    predictions = [utterance_class(logits) for logits in logits_per_utterance]
    return float(np.mean([p == int(label) for p, label in zip(predictions, labels)]))
