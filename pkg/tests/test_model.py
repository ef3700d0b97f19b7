import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.autograd import Tensor, backward, set_default_dtype
from src.data.segmentation import segment_waveform
from src.data.utterance import Utterance
from src.nn.model import (ModelConfig, ModelParams, Variant, count_params, forward, forward_frames,
                          init_params, parameter_shapes, utterance_class)
from src.training.loss import joint_loss
from src.utils.exceptions import ConfigError, DataLoadingError


def small_config(variant, **overrides):
    sizes = dict(N=6, L=4, hop=2, H=4, H_noise=3, H_speech=2, E_speech=5, classes=3, window=2)
    sizes.update(overrides)
    return ModelConfig(variant=variant, **sizes)


def utterance(rng, n, label=None):
    return Utterance(rng.standard_normal(n) * 0.3, 8000, label=label)


def identity_params(cfg):
    """U = V = [I; -I] with every other parameter zero."""
    tensors = {name: Tensor(np.zeros(shape), requires_grad=True, name=name)
               for name, shape in parameter_shapes(cfg).items()}
    basis = np.vstack([np.eye(cfg.L), -np.eye(cfg.L)])
    tensors['encoder.U'] = Tensor(basis, requires_grad=True)
    tensors['decoder.V'] = Tensor(basis.copy(), requires_grad=True)
    return ModelParams(cfg, tensors)


@pytest.mark.parametrize('name', ['ca-att-lstm2', 'CA-Att-LSTM2', 'ca_att_lstm2', 'CaAttLstm2'])
def test_variant_parse_spellings(name):
    assert Variant.parse(name) is Variant.CA_ATT_LSTM2


def test_variant_parse_rejects_unknown():
    with pytest.raises(ConfigError):
        Variant.parse('transformer')


def test_variant_capabilities():
    assert not Variant.PURE_LSTM.has_speech_attention
    assert Variant.ATT_LSTM.has_speech_attention and not Variant.ATT_LSTM.has_classifier
    assert Variant.CA_ATT_LSTM1.has_classifier and Variant.CA_ATT_LSTM2.has_classifier


def test_model_config_validation():
    with pytest.raises(ConfigError):
        small_config('att-lstm', hop=5)
    with pytest.raises(ConfigError):
        small_config('ca-att-lstm1', classes=1)
    with pytest.raises(ConfigError):
        small_config('att-lstm', window=0)
    small_config('att-lstm', classes=1)


def test_model_config_dict_round_trip():
    cfg = small_config('ca-att-lstm1')
    data = cfg.to_dict()
    assert data['variant'] == 'ca-att-lstm1'
    assert ModelConfig.from_dict(data) == cfg
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({**data, 'depth': 3})


def test_parameter_shapes_per_variant():
    H, Hn, Hs, E, C = 4, 3, 2, 5, 3
    d = H + Hn
    pure = parameter_shapes(small_config('pure-lstm'))
    att = parameter_shapes(small_config('att-lstm'))
    ca1 = parameter_shapes(small_config('ca-att-lstm1'))
    ca2 = parameter_shapes(small_config('ca-att-lstm2'))

    assert 'speech_attention.W' not in pure and 'noise_lstm.W_i' not in att
    assert pure['enhancement.W'] == (E, Hs)
    assert att['speech_attention.W'] == (H, Hs)
    assert att['enhancement.W'] == (E, H + Hs)
    assert ca1['speech_attention.W'] == (H, Hs)
    assert ca1['enhancement.W'] == (E, H + Hs + d)
    assert ca1['noise_attention.W'] == (H, Hn)
    assert ca1['classifier.W'] == (C, d)
    assert ca2['speech_attention.W'] == (d + H, d + Hs)
    assert ca2['encoder.U'] == ca2['decoder.V'] == (6, 4)
    assert ca2['spec_lstm.R_g'] == (H, H)
    assert ca2['noise_lstm.W_o'] == (Hn, H)
    assert ca2['mask.W'] == (6, E)


def test_count_params_matches_shapes():
    cfg = small_config('ca-att-lstm2')
    params = init_params(cfg, seed=0)
    expected = sum(int(np.prod(shape)) for shape in parameter_shapes(cfg).values())
    assert count_params(params) == expected
    assert count_params(params.encoder()) == 6 * 4
    assert count_params([params.lstm('spec_lstm'), params.linear('mask')]) == 4 * (4 * 6 + 4 * 4 + 4) + 6 * 5 + 6
    assert count_params(init_params(small_config('pure-lstm'), 0)) < count_params(params)


def test_init_is_deterministic_with_forget_bias_one():
    cfg = small_config('ca-att-lstm1')
    a, b = init_params(cfg, seed=5), init_params(cfg, seed=5)
    for (name, ta), (_, tb) in zip(a, b):
        assert np.array_equal(ta.data, tb.data), name
    assert np.all(a['speech_lstm.b_f'].data == 1.0)
    assert np.all(a['speech_lstm.b_i'].data == 0.0)
    assert not np.array_equal(a['encoder.U'].data, init_params(cfg, seed=6)['encoder.U'].data)


def test_validate_rejects_params_of_another_variant():
    params = init_params(small_config('ca-att-lstm2'), 0)
    with pytest.raises(ConfigError):
        params.validate(small_config('att-lstm'))
    with pytest.raises(ConfigError):
        params['missing.W']


@pytest.mark.parametrize('variant', [v.value for v in Variant])
@pytest.mark.parametrize('length', [4, 9, 30])
def test_forward_shapes(rng, variant, length):
    cfg = small_config(variant)
    out = forward(utterance(rng, length), init_params(cfg, 1))
    T = segment_waveform(np.zeros(length), cfg.L, cfg.hop).num_frames
    assert out.denoised.shape == (length,)
    assert out.spectrogram.shape == out.mask.shape == out.masked_spec.shape == (T, cfg.N)
    assert np.all((out.mask.data > 0) & (out.mask.data < 1))
    if Variant.parse(variant).has_classifier:
        assert out.class_logits.shape == (T, cfg.classes)
        assert out.noise_weights.shape == (T, T)
        assert 0 <= out.predicted_class() < cfg.classes
    else:
        assert out.class_logits is None and out.predicted_class() is None
    assert (out.speech_weights is None) == (variant == 'pure-lstm')


def test_forward_rejects_short_or_stereo_input(rng):
    params = init_params(small_config('att-lstm'), 0)
    with pytest.raises(DataLoadingError):
        forward(utterance(rng, 3), params)
    stereo = Utterance(np.zeros(10), 8000)
    stereo.samples = np.zeros((10, 2))
    with pytest.raises(DataLoadingError):
        forward(stereo, params)


def test_identity_basis_with_zero_weights_halves_the_input(rng):
    cfg = small_config('ca-att-lstm2', N=8, L=4, hop=4)
    utt = utterance(rng, 22)
    out = forward(utt, identity_params(cfg))
    assert_allclose(out.mask.data, 0.5)
    assert_allclose(out.denoised.data, 0.5 * utt.samples, atol=1e-12)


@pytest.mark.parametrize('bias', [1e3, -1e3])
@pytest.mark.parametrize('precision', ['float64', 'float32'])
def test_saturated_mask_stays_strictly_inside_unit_interval(rng, bias, precision):
    set_default_dtype(precision)
    params = init_params(small_config('att-lstm'), 4)
    params['mask.b'].data[:] = bias
    mask = forward(utterance(rng, 20), params).mask.data
    assert np.all((mask > 0.0) & (mask < 1.0))


@pytest.mark.parametrize('variant', [v.value for v in Variant])
def test_outputs_are_causal(rng, variant):
    cfg = small_config(variant)
    params = init_params(cfg, 2)
    segments = segment_waveform(rng.standard_normal(40), cfg.L, cfg.hop)
    full = forward_frames(segments, params)
    for k in (1, 4, segments.num_frames - 1):
        part = forward_frames(segments.prefix(k), params)
        assert_allclose(part.mask.data, full.mask.data[:k], rtol=1e-12)
        assert_allclose(part.masked_spec.data, full.masked_spec.data[:k], rtol=1e-12)
        # Samples before frame k are untouched by later frames.
        assert_allclose(part.denoised.data[:k * cfg.hop], full.denoised.data[:k * cfg.hop], rtol=1e-12, atol=1e-15)
        if full.class_logits is not None:
            assert_allclose(part.class_logits.data, full.class_logits.data[:k], rtol=1e-12)


def test_ca1_without_noise_context_equals_att_lstm(rng):
    ca1_cfg = small_config('ca-att-lstm1')
    att_cfg = small_config('att-lstm')
    ca1 = init_params(ca1_cfg, 3)
    # Make the noise-context columns matter, then check they are the only difference.
    ca1['enhancement.W'].data[:, 6:] += 1.0

    tensors = {}
    for name in parameter_shapes(att_cfg):
        data = ca1[name].data
        if name == 'enhancement.W':
            data = data[:, :att_cfg.H + att_cfg.H_speech]
        tensors[name] = Tensor(data.copy(), requires_grad=True)
    att = ModelParams(att_cfg, tensors)

    utt = utterance(rng, 26)
    zeroed = forward(utt, ca1, force_zero_noise_context=True)
    baseline = forward(utt, att)
    assert_allclose(zeroed.mask.data, baseline.mask.data, rtol=1e-12)
    assert_allclose(zeroed.denoised.data, baseline.denoised.data, rtol=1e-12, atol=1e-15)
    assert not np.allclose(forward(utt, ca1).mask.data, baseline.mask.data)


def test_full_model_gradient_matches_finite_differences(rng, tiny_config, numerical_gradient):
    params = init_params(tiny_config, seed=11)
    utt = Utterance(rng.standard_normal(8) * 0.5, 8000, label=1, clean_ref=rng.standard_normal(8) * 0.3)
    assert forward(utt, params).segments.num_frames == 3

    def loss():
        return joint_loss(forward(utt, params), utt.clean_ref, utt.label, 0.5)

    params.zero_grad()
    backward(loss())
    for name, tensor in params:
        assert_allclose(tensor.grad, numerical_gradient(loss, tensor), rtol=1e-4, atol=1e-6, err_msg=name)


def test_majority_vote_ties_go_to_lower_class():
    assert utterance_class(np.array([[0.0, 1.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 3.0]])) == 2
    assert utterance_class(np.array([[0.0, 1.0], [1.0, 0.0]])) == 0
    assert utterance_class(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])) == 1


def test_future_samples_never_change_past_outputs(tiny_config):
    rng = np.random.default_rng(77)
    params = init_params(tiny_config, seed=2)
    for _ in range(100):
        samples = rng.standard_normal(12)
        k = int(rng.integers(1, 5))
        perturbed = samples.copy()
        # Segments 0..k-1 end before sample (k - 1) * hop + L.
        perturbed[(k - 1) * tiny_config.hop + tiny_config.L:] += rng.standard_normal(12 - (k - 1) * 2 - 4)
        a = forward(Utterance(samples, 8000), params)
        b = forward(Utterance(perturbed, 8000), params)
        assert_allclose(b.mask.data[:k], a.mask.data[:k], rtol=1e-12, atol=1e-14)
        assert_allclose(b.class_logits.data[:k], a.class_logits.data[:k], rtol=1e-12, atol=1e-14)
        weights = a.speech_weights.data
        assert np.all(weights >= 0) and np.all(np.triu(weights, 1) == 0)
        assert np.all(np.count_nonzero(weights, axis=1) <= tiny_config.window + 1)
        assert_allclose(weights.sum(axis=1), 1.0, atol=1e-9)
