import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from src.autograd import Tensor, backward, total
from src.data.segmentation import segment_waveform
from src.nn.layers import (LSTM_GATES, CausalLocalAttention, Conv1dDecoder, Conv1dEncoder, LinearLayer,
                           LstmLayer, attend, causal_window_mask, decode_waveform, encode_waveform,
                           glorot_bound, glorot_uniform, linear, lstm_forward)
from src.utils.exceptions import ContractError, ShapeError


def identity_pair(L):
    basis = np.vstack([np.eye(L), -np.eye(L)])
    return Conv1dEncoder(Tensor(basis)), Conv1dDecoder(Tensor(basis))


def random_lstm(rng, input_size, hidden_size):
    weights = {}
    for gate in LSTM_GATES:
        weights[f'W_{gate}'] = Tensor(rng.standard_normal((hidden_size, input_size)) * 0.5, requires_grad=True)
        weights[f'R_{gate}'] = Tensor(rng.standard_normal((hidden_size, hidden_size)) * 0.5, requires_grad=True)
        weights[f'b_{gate}'] = Tensor(rng.standard_normal(hidden_size) * 0.1, requires_grad=True)
    return LstmLayer(**weights)


@pytest.mark.parametrize('length', [16, 21])
def test_identity_encoder_decoder_reconstructs_waveform(rng, length):
    L = 4
    samples = rng.standard_normal(length)
    segments = segment_waveform(samples, L, L)
    enc, dec = identity_pair(L)

    w = encode_waveform(segments, enc)
    assert w.shape == (segments.num_frames, 2 * L)
    assert np.all(w.data >= 0)
    assert_allclose(decode_waveform(w, dec, segments).data, samples, atol=1e-12)


def test_segmentation_pads_tail_and_counts_frames():
    segments = segment_waveform(np.arange(1.0, 10.0), 4, 2)
    assert segments.num_frames == 4
    assert_allclose(segments.frames[-1], [7.0, 8.0, 9.0, 0.0])
    assert segments.length == 9


def test_encoder_rejects_mismatched_frame_length(rng):
    enc, _ = identity_pair(4)
    with pytest.raises(ShapeError):
        encode_waveform(segment_waveform(rng.standard_normal(20), 5, 5), enc)


def test_glorot_uniform_stays_within_bound(rng):
    values = glorot_uniform(rng, 30, 20)
    assert values.shape == (30, 20)
    assert np.abs(values).max() <= glorot_bound(20, 30)


def test_linear_layer(rng):
    layer = LinearLayer(Tensor(rng.standard_normal((2, 3))), Tensor([1.0, -1.0]))
    x = rng.standard_normal((4, 3))
    assert_allclose(linear(Tensor(x), layer).data, x @ layer.W.data.T + layer.b.data)
    with pytest.raises(ShapeError):
        linear(Tensor(np.ones((4, 2))), layer)


def test_lstm_first_step_matches_hand_computation(rng):
    layer = random_lstm(rng, 3, 2)
    x = rng.standard_normal((1, 3))

    def gate(name):
        return x[0] @ getattr(layer, f'W_{name}').data.T + getattr(layer, f'b_{name}').data

    c = special.expit(gate('i')) * np.tanh(gate('g'))
    h = special.expit(gate('o')) * np.tanh(c)
    assert_allclose(lstm_forward(Tensor(x), layer).data[0], h, rtol=1e-12)


def test_lstm_is_causal_and_shaped(rng):
    layer = random_lstm(rng, 3, 2)
    seq = rng.standard_normal((6, 3))
    full = lstm_forward(Tensor(seq), layer).data
    assert full.shape == (6, 2)
    assert_allclose(lstm_forward(Tensor(seq[:4]), layer).data, full[:4], rtol=1e-12)
    with pytest.raises(ShapeError):
        lstm_forward(Tensor(np.ones((6, 2))), layer)


def test_lstm_gradient(rng, numerical_gradient):
    layer = random_lstm(rng, 2, 2)
    seq = Tensor(rng.standard_normal((4, 2)), requires_grad=True)

    def f():
        out = lstm_forward(seq, layer)
        return total(out * out)

    backward(f())
    for t in (seq, layer.W_f, layer.R_g, layer.b_o):
        assert_allclose(t.grad, numerical_gradient(f, t), rtol=1e-5, atol=1e-8)


def test_causal_window_mask():
    mask = causal_window_mask(5, 2)
    assert mask[0].tolist() == [True, False, False, False, False]
    assert mask[4].tolist() == [False, False, True, True, True]
    assert mask.sum(axis=1).tolist() == [1, 2, 3, 3, 3]


@pytest.mark.parametrize('window', [1, 3, 10])
def test_attention_weights_are_causal_local_distributions(rng, window):
    T, H, Hq = 7, 3, 2
    keys = Tensor(rng.standard_normal((T, H)))
    queries = Tensor(rng.standard_normal((T, Hq)))
    attn = CausalLocalAttention(Tensor(rng.standard_normal((H, Hq))), window)

    context, weights = attend(keys, queries, keys, attn)
    allowed = causal_window_mask(T, window)
    assert np.all(weights.data[~allowed] == 0.0)
    assert np.all(weights.data[allowed] > 0.0)
    assert_allclose(weights.data.sum(axis=1), 1.0, atol=1e-12)
    assert_allclose(weights.data[0, 0], 1.0)
    assert_allclose(context.data[0], keys.data[0])
    assert_allclose(context.data, weights.data @ keys.data, rtol=1e-12)


def test_attention_scores_are_bilinear(rng):
    T, H, Hq = 3, 2, 2
    keys, queries = rng.standard_normal((T, H)), rng.standard_normal((T, Hq))
    W = rng.standard_normal((H, Hq))
    _, weights = attend(Tensor(keys), Tensor(queries), Tensor(keys), CausalLocalAttention(Tensor(W), 5))
    scores = keys[:2] @ W @ queries[1]
    assert_allclose(weights.data[1, :2], special.softmax(scores), rtol=1e-12)


def test_key_prefix_cancels_in_attention_weights(rng):
    T, H, P, Hs = 5, 3, 2, 2
    keys = Tensor(rng.standard_normal((T, H)))
    prefix = Tensor(rng.standard_normal((T, P)))
    queries = Tensor(rng.standard_normal((T, P + Hs)))
    W = rng.standard_normal((P + H, P + Hs))

    _, with_prefix = attend(keys, queries, keys, CausalLocalAttention(Tensor(W), 2), key_prefix=prefix)
    _, without = attend(keys, queries, keys, CausalLocalAttention(Tensor(W[P:]), 2))
    assert_allclose(with_prefix.data, without.data, rtol=1e-10, atol=1e-14)


def test_attention_gradient(rng, numerical_gradient):
    T = 4
    keys = Tensor(rng.standard_normal((T, 2)), requires_grad=True)
    prefix = Tensor(rng.standard_normal((T, 1)), requires_grad=True)
    queries = Tensor(rng.standard_normal((T, 3)), requires_grad=True)
    attn = CausalLocalAttention(Tensor(rng.standard_normal((3, 3)), requires_grad=True), 2)

    def f():
        context, _ = attend(keys, queries, keys, attn, key_prefix=prefix)
        return total(context * context)

    backward(f())
    for t in (keys, queries, attn.W):
        assert_allclose(t.grad, numerical_gradient(f, t), rtol=1e-5, atol=1e-8)


def test_attention_contract_errors(rng):
    keys = Tensor(rng.standard_normal((4, 2)))
    with pytest.raises(ContractError):
        attend(keys, keys, keys, CausalLocalAttention(Tensor(np.eye(2)), 0))
    with pytest.raises(ShapeError):
        attend(keys, keys, keys, CausalLocalAttention(Tensor(np.eye(3)), 2))
    with pytest.raises(ShapeError):
        attend(keys, Tensor(np.ones((3, 2))), keys, CausalLocalAttention(Tensor(np.eye(2)), 2))
