import logging

import numpy as np
import pytest

from src.autograd import set_default_dtype
from src.data.procedural import procedural_testset
from src.nn.model import ModelConfig


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run desk-scale training tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def float64_default():
    set_default_dtype('float64')
    yield
    set_default_dtype('float64')


@pytest.fixture(autouse=True)
def restore_root_handlers():
    root = logging.getLogger()
    before = list(root.handlers)
    yield
    for handler in list(root.handlers):
        if handler not in before:
            root.removeHandler(handler)
            handler.close()
    for handler in before:
        if handler not in root.handlers:
            root.addHandler(handler)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _numerical_gradient(f, tensor, eps=1e-6):
    """Central differences of the scalar f() with respect to every element of tensor.data."""
    grad = np.zeros_like(tensor.data)
    for index in np.ndindex(tensor.data.shape):
        original = tensor.data[index]
        tensor.data[index] = original + eps
        plus = f().item()
        tensor.data[index] = original - eps
        minus = f().item()
        tensor.data[index] = original
        grad[index] = (plus - minus) / (2 * eps)
    return grad


@pytest.fixture
def numerical_gradient():
    return _numerical_gradient


def _adam_reference(grad_fn, x0, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam written out longhand; returns the trajectory after each step."""
    x, m, v, out = x0, 0.0, 0.0, []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
        out.append(x)
    return out


@pytest.fixture
def adam_reference():
    return _adam_reference


@pytest.fixture
def tiny_config():
    """The gradient-check configuration: 8 samples give T=3 segments of L=4."""
    return ModelConfig(N=8, L=4, hop=2, H=3, H_noise=3, H_speech=3, E_speech=3, classes=2, window=2,
                       variant='ca-att-lstm2')


@pytest.fixture
def corpus_config():
    """Small model matched to the tiny procedural corpus (80-sample utterances)."""
    return ModelConfig(N=8, L=8, hop=4, H=4, H_noise=3, H_speech=3, E_speech=4, classes=2, window=3,
                       variant='ca-att-lstm2')


@pytest.fixture(scope='session')
def tiny_corpus(tmp_path_factory):
    """Two noise classes, 12 mixtures of 10 ms at 8 kHz: 8 train, 2 valid, 2 test."""
    out_dir = tmp_path_factory.mktemp('tiny_corpus')
    return procedural_testset(2, 6, seed=3, out_dir=str(out_dir), sample_rate=8000, duration=0.01,
                              split_counts=(8, 2, 2))
