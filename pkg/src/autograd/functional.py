"""
Differentiable non-linearities and the compound operations the network needs.
"""
import numpy as np
from scipy import special

from ..utils.exceptions import ContractError, ShapeError
from .tensor import add, as_tensor, make_result, mul, sub

def relu(x):
    # Subgradient at 0 is 0.
    positive = x.data > 0
    return make_result(np.where(positive, x.data, 0.0), (x,), lambda g: (g * positive,), 'relu')


def sigmoid(x):
    s = special.expit(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),), 'sigmoid')


def clip(x, low, high):
    """Clamps to [low, high]; clamped entries pass no gradient."""
    inside = (x.data >= low) & (x.data <= high)
    return make_result(np.clip(x.data, low, high), (x,), lambda g: (g * inside,), 'clip')


def open_unit(x):
    """Clamps probabilities into the open interval (0, 1) at the tensor's precision."""
    eps = np.finfo(x.data.dtype).eps
    return clip(x, eps, 1.0 - eps)


def tanh(x):
    t = np.tanh(x.data)
    return make_result(t, (x,), lambda g: (g * (1.0 - t * t),), 'tanh')


def square(x):
    return make_result(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), 'square')


UNARY_OPS = {'relu': relu, 'sigmoid': sigmoid, 'tanh': tanh, 'square': square}
BINARY_OPS = {'add': add, 'sub': sub, 'mul': mul}


def elementwise(op, *args):
    """Dispatches an element-wise operation by name."""
    args = [as_tensor(a) for a in args]
    if op in UNARY_OPS:
        if len(args) != 1:
            raise ContractError(f"'{op}' takes one operand, got {len(args)}.")
        return UNARY_OPS[op](args[0])
    if op in BINARY_OPS:
        if len(args) != 2:
            raise ContractError(f"'{op}' takes two operands, got {len(args)}.")
        return BINARY_OPS[op](*args)
    raise ContractError(f"Unknown element-wise operation '{op}'.")


def bias_add(x, b):
    """Adds a bias vector of length D to every row of a (T, D) matrix."""
    if x.ndim != 2 or b.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"bias_add expects (T, D) and (D,), got {x.shape} and {b.shape}.")
    return make_result(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=0)), 'bias_add')


def softmax(x, axis=-1, mask=None):
    """
    Softmax along `axis`, computed with max-subtraction.

    Entries where `mask` is False get probability exactly 0; every slice along
    `axis` must keep at least one entry.
    """
    if x.size == 0 or x.shape[axis] == 0:
        raise ShapeError("softmax of an empty vector is undefined.")
    scores = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeError(f"softmax mask shape {mask.shape} differs from input {x.shape}.")
        if not np.all(mask.any(axis=axis)):
            raise ContractError("softmax mask removes every entry of a slice.")
        scores = np.where(mask, scores, -np.inf)
    probs = special.softmax(scores, axis=axis)

    def _backward(g):
        inner = np.sum(g * probs, axis=axis, keepdims=True)
        return (probs * (g - inner),)

    return make_result(probs, (x,), _backward, 'softmax')


def cross_entropy(logits, labels):
    """
    Summed cross-entropy of (T, C) logits against integer labels of length T.

    The softmax is folded in through log-softmax so confident logits stay finite.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy expects (T, C) logits and T labels, got {logits.shape} and {labels.shape}.")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ContractError(f"Labels must lie in [0, {logits.shape[1]}).")
    log_probs = special.log_softmax(logits.data, axis=1)
    rows = np.arange(labels.shape[0])
    value = -np.sum(log_probs[rows, labels])

    def _backward(g):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (g * grad,)

    return make_result(value, (logits,), _backward, 'cross_entropy')


def overlap_add(frames, hop, length):
    """
    Sums (T, L) frames placed every `hop` samples and trims to `length` samples.
    """
    if frames.ndim != 2:
        raise ShapeError(f"overlap_add expects (T, L) frames, got {frames.shape}.")
    if hop < 1:
        raise ContractError(f"hop must be positive, got {hop}.")
    n_frames, frame_len = frames.shape
    padded = (n_frames - 1) * hop + frame_len
    if length > padded:
        raise ShapeError(f"Cannot trim {padded} reconstructed samples to {length}.")
    index = np.arange(n_frames)[:, None] * hop + np.arange(frame_len)[None, :]
    out = np.zeros(padded, dtype=frames.data.dtype)
    np.add.at(out, index, frames.data)

    def _backward(g):
        full = np.zeros(padded, dtype=g.dtype)
        full[:length] = g
        return (full[index],)

    return make_result(out[:length], (frames,), _backward, 'overlap_add')
