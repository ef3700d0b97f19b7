"""
The full enhancement network and its four variants.

    waveform -> segments -> encoder (w) -> spectrogram LSTM (h)
        noise branch   (classification variants): noise LSTM (h_n), attention
                       over h queried by h_n, d_n = [c_n; h_n], class logits
        speech branch: speech LSTM (h_s), attention over h (keys optionally
                       prefixed with d_n), enhancement vector, sigmoid mask
    -> y = w * mask -> decoder -> overlap-add -> denoised waveform

Pure-LSTM drops both attentions, Att-LSTM drops the noise branch,
CA-Att-LSTM1 feeds d_n only to the enhancement head, CA-Att-LSTM2 also
prefixes the speech attention keys and query with it.
"""
import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields, is_dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ..autograd import Tensor, concat, mul, open_unit, sigmoid, tanh
from ..data.segmentation import SegmentBatch, segment_waveform
from ..utils.exceptions import ConfigError, DataLoadingError
from .layers import (LSTM_GATES, CausalLocalAttention, Conv1dDecoder, Conv1dEncoder, LinearLayer,
                     LstmLayer, attend, decode_waveform, encode_waveform, glorot_uniform, linear,
                     lstm_forward)

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    PURE_LSTM = 'pure-lstm'
    ATT_LSTM = 'att-lstm'
    CA_ATT_LSTM1 = 'ca-att-lstm1'
    CA_ATT_LSTM2 = 'ca-att-lstm2'

    @property
    def has_classifier(self):
        return self in (Variant.CA_ATT_LSTM1, Variant.CA_ATT_LSTM2)

    @property
    def has_speech_attention(self):
        return self is not Variant.PURE_LSTM

    @classmethod
    def parse(cls, name):
        """Accepts 'ca-att-lstm2', 'CA-Att-LSTM2', 'ca_att_lstm2' or 'CaAttLstm2'."""
        if isinstance(name, Variant):
            return name
        key = str(name).lower().replace('_', '').replace('-', '')
        for variant in cls:
            if variant.value.replace('-', '') == key:
                return variant
        raise ConfigError(f"Unknown model variant '{name}'. Choose one of {[v.value for v in cls]}.")


@dataclass(frozen=True)
class ModelConfig:
    """Network sizes. Defaults are the full-size configuration; desk runs shrink them."""
    N: int = 512
    L: int = 160
    hop: int = 80
    H: int = 256
    H_noise: int = 112
    H_speech: int = 112
    E_speech: int = 256
    classes: int = 20
    window: int = 5
    variant: Variant = Variant.CA_ATT_LSTM2

    def __post_init__(self):
        object.__setattr__(self, 'variant', Variant.parse(self.variant))
        for name in ('N', 'L', 'hop', 'H', 'H_noise', 'H_speech', 'E_speech', 'classes', 'window'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"Model size '{name}' must be a positive integer, got {value!r}.")
        if self.hop > self.L:
            raise ConfigError(f"hop ({self.hop}) cannot exceed the segment length L ({self.L}).")
        if self.variant.has_classifier and self.classes < 2:
            raise ConfigError(f"Variant {self.variant.value} needs at least 2 noise classes, got {self.classes}.")

    def to_dict(self):
        data = asdict(self)
        data['variant'] = self.variant.value
        return data

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown model configuration keys: {sorted(unknown)}")
        return cls(**{k: int(v) if k != 'variant' else v for k, v in data.items()})


def _lstm_shapes(prefix, input_size, hidden_size):
    shapes = {}
    for gate in LSTM_GATES:
        shapes[f'{prefix}.W_{gate}'] = (hidden_size, input_size)
    for gate in LSTM_GATES:
        shapes[f'{prefix}.R_{gate}'] = (hidden_size, hidden_size)
    for gate in LSTM_GATES:
        shapes[f'{prefix}.b_{gate}'] = (hidden_size,)
    return shapes


def enhancement_input_size(cfg):
    if cfg.variant is Variant.PURE_LSTM:
        return cfg.H_speech
    if cfg.variant is Variant.ATT_LSTM:
        return cfg.H + cfg.H_speech
    return cfg.H + cfg.H_speech + cfg.H + cfg.H_noise


def parameter_shapes(cfg):
    """Ordered name -> shape map of every learnable tensor the variant uses."""
    noise_context = cfg.H + cfg.H_noise
    shapes = {'encoder.U': (cfg.N, cfg.L), 'decoder.V': (cfg.N, cfg.L)}
    shapes.update(_lstm_shapes('spec_lstm', cfg.N, cfg.H))
    if cfg.variant.has_classifier:
        shapes.update(_lstm_shapes('noise_lstm', cfg.H, cfg.H_noise))
        shapes['noise_attention.W'] = (cfg.H, cfg.H_noise)
        shapes['classifier.W'] = (cfg.classes, noise_context)
        shapes['classifier.b'] = (cfg.classes,)
    shapes.update(_lstm_shapes('speech_lstm', cfg.H, cfg.H_speech))
    if cfg.variant is Variant.CA_ATT_LSTM2:
        shapes['speech_attention.W'] = (noise_context + cfg.H, noise_context + cfg.H_speech)
    elif cfg.variant.has_speech_attention:
        shapes['speech_attention.W'] = (cfg.H, cfg.H_speech)
    shapes['enhancement.W'] = (cfg.E_speech, enhancement_input_size(cfg))
    shapes['enhancement.b'] = (cfg.E_speech,)
    shapes['mask.W'] = (cfg.N, cfg.E_speech)
    shapes['mask.b'] = (cfg.N,)
    return shapes


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict

    def __getitem__(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise ConfigError(f"Parameter '{name}' is not part of variant {self.config.variant.value}.")

    def __iter__(self):
        return iter(self.tensors.items())

    def parameters(self):
        return list(self.tensors.values())

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def validate(self, cfg=None):
        """Raises ConfigError unless names and shapes match `cfg` (default: own config)."""
        cfg = cfg or self.config
        expected = parameter_shapes(cfg)
        if list(expected) != list(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ConfigError(
                f"Parameters do not match variant {cfg.variant.value}: missing {missing}, unexpected {extra}.")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ConfigError(f"Parameter '{name}' has shape {self.tensors[name].shape}, expected {shape}.")

    def encoder(self):
        return Conv1dEncoder(self['encoder.U'])

    def decoder(self):
        return Conv1dDecoder(self['decoder.V'])

    def lstm(self, prefix):
        kwargs = {f'{kind}_{gate}': self[f'{prefix}.{kind}_{gate}'] for kind in 'WRb' for gate in LSTM_GATES}
        return LstmLayer(**kwargs)

    def attention(self, prefix):
        return CausalLocalAttention(self[f'{prefix}.W'], self.config.window)

    def linear(self, prefix):
        return LinearLayer(self[f'{prefix}.W'], self[f'{prefix}.b'])


@dataclass
class ForwardOutput:
    spectrogram: Tensor
    mask: Tensor
    masked_spec: Tensor
    denoised: Tensor
    segments: SegmentBatch
    class_logits: Optional[Tensor] = None
    noise_weights: Optional[Tensor] = None
    speech_weights: Optional[Tensor] = None

    def predicted_class(self):
        if self.class_logits is None:
            return None
        return utterance_class(self.class_logits.data)


def utterance_class(logits):
    """Majority vote over per-frame argmax; ties go to the lower class id."""
    logits = np.asarray(logits)
    votes = np.bincount(np.argmax(logits, axis=1), minlength=logits.shape[1])
    return int(np.argmax(votes))


def init_params(cfg, seed):
    """Glorot-uniform weights, zero biases except LSTM forget gates (1). Deterministic per seed."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in parameter_shapes(cfg).items():
        if len(shape) == 2:
            values = glorot_uniform(rng, *shape)
        elif name.endswith('.b_f'):
            values = np.ones(shape)
        else:
            values = np.zeros(shape)
        tensors[name] = Tensor(values, requires_grad=True, name=name)
    params = ModelParams(cfg, tensors)
    logger.info(f"Initialised {cfg.variant.value} with {count_params(params)} parameters (seed {seed})")
    return params


def _iter_tensors(obj):
    if isinstance(obj, Tensor):
        yield obj
    elif isinstance(obj, ModelParams):
        yield from obj.tensors.values()
    elif isinstance(obj, Mapping):
        for value in obj.values():
            yield from _iter_tensors(value)
    elif is_dataclass(obj):
        for f in fields(obj):
            yield from _iter_tensors(getattr(obj, f.name))
    elif isinstance(obj, (list, tuple)):
        for item in obj:
            yield from _iter_tensors(item)


def count_params(params):
    """Exact number of learnable scalars in params, a layer, a mapping or a list of those."""
    return int(sum(t.size for t in _iter_tensors(params)))


def forward(audio, params, cfg=None, force_zero_noise_context=False):
    """Runs the network on an Utterance and returns masks, spectrograms, logits and the waveform."""
    cfg = cfg or params.config
    params.validate(cfg)
    samples = np.asarray(audio.samples)
    if samples.ndim != 1:
        raise DataLoadingError(f"Expected a mono waveform, got shape {samples.shape}.")
    if samples.size < cfg.L:
        raise DataLoadingError(f"Waveform has {samples.size} samples, at least L={cfg.L} are needed.")
    segments = segment_waveform(samples, cfg.L, cfg.hop)
    return forward_frames(segments, params, cfg, force_zero_noise_context)


def forward_frames(segments, params, cfg=None, force_zero_noise_context=False):
    """Frame-level body of `forward`; every output row t depends on segments 0..t only."""
    cfg = cfg or params.config
    variant = cfg.variant

    w = encode_waveform(segments, params.encoder())
    h = lstm_forward(w, params.lstm('spec_lstm'))

    d_noise = logits = noise_weights = speech_weights = None
    if variant.has_classifier:
        h_noise = lstm_forward(h, params.lstm('noise_lstm'))
        c_noise, noise_weights = attend(h, h_noise, h, params.attention('noise_attention'))
        d_noise = concat([c_noise, h_noise], axis=1)
        logits = linear(d_noise, params.linear('classifier'))
        if force_zero_noise_context:
            d_noise = Tensor(np.zeros(d_noise.shape))

    h_speech = lstm_forward(h, params.lstm('speech_lstm'))
    if variant is Variant.PURE_LSTM:
        features = h_speech
    else:
        attention = params.attention('speech_attention')
        if variant is Variant.CA_ATT_LSTM2:
            query = concat([d_noise, h_speech], axis=1)
            c_speech, speech_weights = attend(h, query, h, attention, key_prefix=d_noise)
        else:
            c_speech, speech_weights = attend(h, h_speech, h, attention)
        parts = [c_speech, h_speech]
        if variant.has_classifier:
            parts.append(d_noise)
        features = concat(parts, axis=1)

    enhancement = tanh(linear(features, params.linear('enhancement')))
    # sigmoid saturates to exactly 0 or 1 for large logits.
    mask = open_unit(sigmoid(linear(enhancement, params.linear('mask'))))
    y = mul(w, mask)
    denoised = decode_waveform(y, params.decoder(), segments)
    return ForwardOutput(spectrogram=w, mask=mask, masked_spec=y, denoised=denoised, segments=segments,
                         class_logits=logits, noise_weights=noise_weights, speech_weights=speech_weights)
