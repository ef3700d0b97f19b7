"""
Network building blocks: framed 1-D conv encoder/decoder, LSTM, linear heads
and the causal local bilinear attention shared by the noise and speech branches.

Layers are thin views over parameter tensors owned by `ModelParams`; the
functions below never mutate them, so a forward pass may run on any thread.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..autograd import (Tensor, bias_add, concat, matmul, mul, ones, overlap_add, relu, sigmoid,
                        softmax, tanh)
from ..utils.exceptions import ContractError, ShapeError

logger = logging.getLogger(__name__)

LSTM_GATES = ('i', 'f', 'g', 'o')


def glorot_bound(fan_in, fan_out):
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def glorot_uniform(rng, fan_out, fan_in):
    """Normalized (Glorot) uniform initialisation of a (fan_out, fan_in) matrix."""
    bound = glorot_bound(fan_in, fan_out)
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


@dataclass
class Conv1dEncoder:
    U: Tensor

    @property
    def num_filters(self):
        return self.U.shape[0]

    @property
    def frame_len(self):
        return self.U.shape[1]


@dataclass
class Conv1dDecoder:
    V: Tensor

    @property
    def num_filters(self):
        return self.V.shape[0]

    @property
    def frame_len(self):
        return self.V.shape[1]


@dataclass
class LstmLayer:
    W_i: Tensor
    W_f: Tensor
    W_g: Tensor
    W_o: Tensor
    R_i: Tensor
    R_f: Tensor
    R_g: Tensor
    R_o: Tensor
    b_i: Tensor
    b_f: Tensor
    b_g: Tensor
    b_o: Tensor

    @property
    def input_size(self):
        return self.W_i.shape[1]

    @property
    def hidden_size(self):
        return self.W_i.shape[0]

    def stacked(self):
        """Input weights, recurrent weights and biases stacked in i, f, g, o order."""
        W = concat([getattr(self, f'W_{gate}') for gate in LSTM_GATES], axis=0)
        R = concat([getattr(self, f'R_{gate}') for gate in LSTM_GATES], axis=0)
        b = concat([getattr(self, f'b_{gate}') for gate in LSTM_GATES], axis=0)
        return W, R, b


@dataclass
class CausalLocalAttention:
    W: Tensor
    window: int

    @property
    def key_size(self):
        return self.W.shape[0]

    @property
    def query_size(self):
        return self.W.shape[1]


@dataclass
class LinearLayer:
    W: Tensor
    b: Tensor

    @property
    def in_features(self):
        return self.W.shape[1]

    @property
    def out_features(self):
        return self.W.shape[0]


def encode_waveform(segments, enc):
    """w = ReLU(x U^T): one non-negative N-dim row per segment."""
    if segments.frame_len != enc.frame_len:
        raise ShapeError(f"Segments have {segments.frame_len} samples, encoder expects {enc.frame_len}.")
    frames = Tensor(segments.frames)
    return relu(matmul(frames, enc.U.T))


def linear(x, layer):
    if x.shape[1] != layer.in_features:
        raise ShapeError(f"Linear layer expects {layer.in_features} inputs, got {x.shape[1]}.")
    return bias_add(matmul(x, layer.W.T), layer.b)


def lstm_forward(seq, layer):
    """Left-to-right LSTM over a (T, D_in) sequence from a zero state; returns (T, H) hidden states."""
    if seq.ndim != 2 or seq.shape[1] != layer.input_size:
        raise ShapeError(f"LSTM expects (T, {layer.input_size}) input, got {seq.shape}.")
    H = layer.hidden_size
    W, R, b = layer.stacked()
    projected = bias_add(matmul(seq, W.T), b)
    R_t = R.T

    outputs = []
    h = c = None
    for t in range(seq.shape[0]):
        gates = projected[t:t + 1]
        if h is not None:
            gates = gates + matmul(h, R_t)
        squashed = sigmoid(gates)
        i, f, o = squashed[:, :H], squashed[:, H:2 * H], squashed[:, 3 * H:]
        g = tanh(gates[:, 2 * H:3 * H])
        c = mul(i, g) if c is None else mul(f, c) + mul(i, g)
        h = mul(o, tanh(c))
        outputs.append(h)
    return concat(outputs, axis=0)


def causal_window_mask(num_frames, window):
    """mask[t, k] is True for k in [max(0, t - window), t]."""
    t = np.arange(num_frames)[:, None]
    k = np.arange(num_frames)[None, :]
    return (k <= t) & (k >= t - window)


def attend(keys, queries, values, attn, key_prefix=None):
    """
    Causal local attention with bilinear score k^T W q.

    weights[t, k] is the softmax over k in [max(0, t - w), t] of
    key(t, k)^T W queries[t], and context[t] averages `values` with those
    weights. The key is keys[k], or [key_prefix[t]; keys[k]] when a per-query
    prefix is given (the concatenated keys of the classification-aided speech
    attention). Returns (context, weights).
    """
    num_frames = keys.shape[0]
    if queries.shape[0] != num_frames or values.shape[0] != num_frames:
        raise ShapeError(f"keys, queries and values must share T, got {keys.shape}, {queries.shape}, {values.shape}.")
    prefix_dim = 0 if key_prefix is None else key_prefix.shape[1]
    if key_prefix is not None and key_prefix.shape[0] != num_frames:
        raise ShapeError(f"key prefix has {key_prefix.shape[0]} frames, expected {num_frames}.")
    if keys.shape[1] + prefix_dim != attn.key_size or queries.shape[1] != attn.query_size:
        raise ShapeError(
            f"Attention matrix is {attn.W.shape}, keys give {keys.shape[1] + prefix_dim} and queries {queries.shape[1]}.")
    if attn.window < 1:
        raise ContractError(f"Attention window must be >= 1, got {attn.window}.")

    # Row t of `projected` is W q_t.
    projected = matmul(queries, attn.W.T)
    scores = matmul(projected[:, prefix_dim:], keys.T)
    if key_prefix is not None:
        # Constant along k for each query row, so it cancels in the softmax.
        row_term = matmul(mul(key_prefix, projected[:, :prefix_dim]), ones((prefix_dim, 1)))
        scores = scores + matmul(row_term, ones((1, num_frames)))

    weights = softmax(scores, axis=1, mask=causal_window_mask(num_frames, attn.window))
    context = matmul(weights, values)
    return context, weights


def decode_waveform(masked, dec, seg_meta):
    """x_t = y_t V per segment, then overlap-add at the segmentation hop."""
    if masked.ndim != 2 or masked.shape[1] != dec.num_filters:
        raise ShapeError(f"Decoder expects (T, {dec.num_filters}) input, got {masked.shape}.")
    if masked.shape[0] != seg_meta.num_frames or seg_meta.frame_len != dec.frame_len:
        raise ShapeError(
            f"Masked spectrogram has {masked.shape[0]} frames of {dec.frame_len} samples, "
            f"segmentation has {seg_meta.num_frames} of {seg_meta.frame_len}.")
    frames = matmul(masked, dec.V)
    return overlap_add(frames, seg_meta.hop, seg_meta.length)
