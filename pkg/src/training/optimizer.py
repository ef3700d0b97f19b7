"""
Bias-corrected Adam over a ModelParams collection, the exponential learning
rate schedule and global gradient-norm clipping.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from ..utils.exceptions import ContractError

logger = logging.getLogger(__name__)

MOMENT_PREFIXES = ('adam.m.', 'adam.v.')


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def to_arrays(self):
        """Moments as flat named arrays for the checkpoint container."""
        arrays = {f'adam.m.{name}': value for name, value in self.m.items()}
        arrays.update({f'adam.v.{name}': value for name, value in self.v.items()})
        return arrays

    def to_metadata(self):
        return {'beta1': self.beta1, 'beta2': self.beta2, 'eps': self.eps, 'step': self.step}

    @classmethod
    def from_checkpoint(cls, arrays, metadata):
        state = cls(beta1=float(metadata['beta1']), beta2=float(metadata['beta2']),
                    eps=float(metadata['eps']), step=int(metadata['step']))
        for key, value in arrays.items():
            if key.startswith('adam.m.'):
                state.m[key[len('adam.m.'):]] = np.array(value)
            elif key.startswith('adam.v.'):
                state.v[key[len('adam.v.'):]] = np.array(value)
        return state


def adam_step(params, grads, state, lr):
    """
    One in-place Adam update of every parameter:

        m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
        p <- p - lr * m_hat / (sqrt(v_hat) + eps)

    `grads` maps parameter names to gradient arrays.
    """
    if lr <= 0:
        raise ContractError(f"Learning rate must be positive, got {lr}.")
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step

    for name, param in params:
        grad = grads.get(name)
        if grad is None:
            raise ContractError(f"No gradient for parameter '{name}'; run backward() before adam_step().")
        if grad.shape != param.shape:
            raise ContractError(f"Gradient of '{name}' has shape {grad.shape}, parameter has {param.shape}.")
        m = state.m.setdefault(name, np.zeros_like(param.data))
        v = state.v.setdefault(name, np.zeros_like(param.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(grad)
        param.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)


def lr_schedule(epoch, cfg):
    """
    Geometric decay from cfg.lr_start at epoch 0 to cfg.lr_end at the last epoch.

    Written as lr_start^(1-r) * lr_end^r so both endpoints are exact.
    """
    if not 0 <= epoch < cfg.max_epochs:
        raise ContractError(f"Epoch {epoch} outside [0, {cfg.max_epochs}).")
    if cfg.max_epochs == 1:
        return cfg.lr_start
    r = epoch / (cfg.max_epochs - 1)
    return cfg.lr_start ** (1.0 - r) * cfg.lr_end ** r


def global_grad_norm(params):
    return float(np.sqrt(sum(float(np.sum(np.square(t.grad))) for t in params.parameters() if t.grad is not None)))


def clip_grad_norm(params, max_norm):
    """Rescales all gradients so their joint L2 norm is at most max_norm. Returns the norm before clipping."""
    if max_norm <= 0:
        raise ContractError(f"max_norm must be positive, got {max_norm}.")
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / norm
        for t in params.parameters():
            if t.grad is not None:
                t.grad *= factor
        logger.debug(f"Clipped gradient norm {norm:.4g} to {max_norm}")
    return norm
