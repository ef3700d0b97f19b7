import numpy as np

from ..autograd import Tensor, add, cross_entropy, scale, square, sub, total
from ..utils.exceptions import ContractError


def waveform_error(denoised, clean):
    """Sum of squared sample errors between the network output and the clean waveform."""
    clean = np.asarray(clean)
    if denoised.shape != clean.shape:
        raise ContractError(f"Denoised waveform has shape {denoised.shape}, clean reference has {clean.shape}.")
    return total(square(sub(denoised, Tensor(clean))))


def joint_loss(out, clean, label, alpha):
    """
    (1 - alpha) * sum_n (s_hat(n) - s(n))^2 + alpha * sum_t CE(logits_t, label)

    The cross-entropy uses the utterance's noise class as the target of every
    frame. Outputs without class logits train on the waveform term alone and
    alpha is treated as 0.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must lie in [0, 1], got {alpha}.")
    error = waveform_error(out.denoised, clean)
    if out.class_logits is None or alpha == 0.0:
        return error

    if label is None:
        raise ContractError("A noise-class label is required when the classification term is weighted.")
    num_frames, num_classes = out.class_logits.shape
    if not 0 <= int(label) < num_classes:
        raise ContractError(f"Label {label} outside [0, {num_classes}).")
    ce = cross_entropy(out.class_logits, np.full(num_frames, int(label)))
    return add(scale(error, 1.0 - alpha), scale(ce, alpha))
