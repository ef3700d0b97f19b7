"""
Training loop: seeded per-epoch shuffling, per-utterance backward passes,
Adam with exponential learning rate decay, validation-based early stopping.

Outputs in `output_dir`:
    best.ckpt    parameters of the epoch with the lowest validation loss
    last.ckpt    parameters, Adam moments and counters after the last epoch (for --resume)
    metrics.csv  one line per epoch: epoch,train_loss,valid_loss,valid_accuracy,lr
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Callable, Optional

import numpy as np
import pandas as pd

from ..autograd import backward, no_grad, set_default_dtype
from ..data.corpus import load_split
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.model import ModelParams, forward, init_params
from ..utils.exceptions import ConfigError, DataLoadingError, NumericalError
from .loss import joint_loss
from .optimizer import AdamState, adam_step, clip_grad_norm, lr_schedule

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['epoch', 'train_loss', 'valid_loss', 'valid_accuracy', 'lr']
DEFAULT_ALPHA = 0.1


@dataclass(frozen=True)
class TrainConfig:
    alpha: Optional[float] = None
    lr_start: float = 1e-4
    lr_end: float = 1e-8
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 1
    grad_clip: Optional[float] = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}.")
        if not self.lr_start >= self.lr_end > 0:
            raise ConfigError(f"Learning rates need lr_start >= lr_end > 0, got {self.lr_start} and {self.lr_end}.")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be at least 1, got {self.max_epochs}.")
        if self.patience < 1:
            raise ConfigError(f"patience must be at least 1, got {self.patience}.")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}.")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError(f"grad_clip must be positive or null, got {self.grad_clip}.")

    def alpha_for(self, variant):
        """Loss weight of the classification term; null means 0.1 with a classifier, 0 without."""
        if not variant.has_classifier:
            if self.alpha:
                raise ConfigError(f"Variant {variant.value} has no noise classifier; alpha must be 0, got {self.alpha}.")
            return 0.0
        return DEFAULT_ALPHA if self.alpha is None else float(self.alpha)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown training configuration keys: {sorted(unknown)}")
        return cls(**data)


class EarlyStopping:
    """Stops after `patience` consecutive epochs without a strictly lower validation loss."""

    def __init__(self, patience, best_loss=math.inf, best_epoch=0, stale_epochs=0):
        self.patience = patience
        self.best_loss = best_loss
        self.best_epoch = best_epoch
        self.stale_epochs = stale_epochs

    def update(self, epoch, loss):
        """Records an epoch's validation loss; returns True if it is a new best."""
        if loss < self.best_loss:
            self.best_loss, self.best_epoch, self.stale_epochs = loss, epoch, 0
            return True
        self.stale_epochs += 1
        return False

    @property
    def should_stop(self):
        return self.stale_epochs >= self.patience


@dataclass
class TrainResult:
    params: ModelParams
    history: pd.DataFrame
    best_epoch: int
    best_valid_loss: float
    stopped_early: bool
    checkpoint_path: str


def _check_gradients(params, context):
    for name, t in params:
        if t.grad is not None and not np.all(np.isfinite(t.grad)):
            raise NumericalError(f"Non-finite gradient in parameter '{name}' {context}.")


def _check_parameters(params, context):
    for name, t in params:
        if not np.all(np.isfinite(t.data)):
            raise NumericalError(f"Parameter '{name}' became non-finite {context}.")


def validation_pass(params, utterances, alpha, workers=1):
    """Mean joint loss and utterance-level accuracy (NaN without a classifier) over `utterances`."""

    def score(utt):
        with no_grad():
            out = forward(utt, params)
            loss = joint_loss(out, utt.clean_ref, utt.label, alpha).item()
        return loss, out.predicted_class()

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(score, utterances))
    losses = [loss for loss, _ in results]
    predictions = [pred for _, pred in results]
    if predictions[0] is None:
        accuracy = math.nan
    else:
        accuracy = float(np.mean([pred == utt.label for pred, utt in zip(predictions, utterances)]))
    return float(np.mean(losses)), accuracy


def write_metrics(history, path):
    history.to_csv(path, index=False, columns=METRIC_COLUMNS, lineterminator='\n', na_rep='nan')


def read_metrics(path):
    if not os.path.exists(path):
        raise DataLoadingError(f"Metrics log not found at {path}")
    return pd.read_csv(path, float_precision='round_trip')


def _save_last(path, params, state, epoch, stopper, alpha):
    metadata = {'epoch': int(epoch), 'best_valid_loss': float(stopper.best_loss), 'best_epoch': int(stopper.best_epoch),
                'stale_epochs': int(stopper.stale_epochs), 'alpha': float(alpha), 'adam': state.to_metadata()}
    save_checkpoint(path, params, extra_arrays=state.to_arrays(), metadata=metadata)


def _resume(output_dir, model_cfg):
    checkpoint = load_checkpoint(os.path.join(output_dir, 'last.ckpt'))
    if checkpoint.params.config != model_cfg:
        raise ConfigError(f"Cannot resume: last.ckpt holds {checkpoint.params.config}, the run asks for {model_cfg}.")
    meta = checkpoint.metadata
    state = AdamState.from_checkpoint(checkpoint.extra_arrays, meta['adam'])
    epoch = int(meta['epoch'])
    history = read_metrics(os.path.join(output_dir, 'metrics.csv'))
    history = history[history['epoch'] <= epoch].reset_index(drop=True)
    if len(history) != epoch:
        raise DataLoadingError(f"metrics.csv in {output_dir} has {len(history)} epochs, last.ckpt records {epoch}.")
    logger.info(f"Resuming from epoch {epoch} (best valid loss {meta['best_valid_loss']:.6g} at epoch {meta['best_epoch']})")
    return (checkpoint.params, state, epoch, history,
            (float(meta['best_valid_loss']), int(meta['best_epoch']), int(meta['stale_epochs'])))


def train_loop(manifest, model_cfg, train_cfg, output_dir, resume=False, workers=1,
               on_epoch_end: Optional[Callable] = None):
    """
    Trains `model_cfg` on the manifest's train split, validating on its valid split.

    `on_epoch_end(epoch, row)` is called after each epoch's checkpoints and log
    line are written. With `resume`, training continues from last.ckpt and the
    metrics log in `output_dir`.
    """
    set_default_dtype('float64')
    variant = model_cfg.variant
    alpha = train_cfg.alpha_for(variant)
    if variant.has_classifier and manifest.num_classes != model_cfg.classes:
        raise ConfigError(f"Manifest declares {manifest.num_classes} noise classes, the model has {model_cfg.classes}.")

    train_set = load_split(manifest, 'train')
    valid_set = load_split(manifest, 'valid')
    os.makedirs(output_dir, exist_ok=True)
    best_path = os.path.join(output_dir, 'best.ckpt')
    last_path = os.path.join(output_dir, 'last.ckpt')
    metrics_path = os.path.join(output_dir, 'metrics.csv')

    if resume:
        params, state, start_epoch, history, (best, best_epoch, stale) = _resume(output_dir, model_cfg)
        records = history.to_dict('records')
        stopper = EarlyStopping(train_cfg.patience, best, best_epoch, stale)
    else:
        params = init_params(model_cfg, train_cfg.seed)
        state = AdamState()
        start_epoch = 0
        records = []
        stopper = EarlyStopping(train_cfg.patience)

    logger.info(f"Training {variant.value} on {len(train_set)} utterances (valid {len(valid_set)}), "
                f"alpha={alpha}, epochs {start_epoch + 1}..{train_cfg.max_epochs}")

    epoch = start_epoch
    while epoch < train_cfg.max_epochs and not stopper.should_stop:
        lr = lr_schedule(epoch, train_cfg)
        epoch += 1
        order = np.random.default_rng([train_cfg.seed, epoch]).permutation(len(train_set))

        losses = []
        params.zero_grad()
        for position, index in enumerate(order):
            utt = train_set[index]
            context = f"at epoch {epoch}, utterance '{utt.name}'"
            try:
                out = forward(utt, params)
                loss = joint_loss(out, utt.clean_ref, utt.label, alpha)
                backward(loss)
            except NumericalError as e:
                raise NumericalError(f"{e} ({context})") from e
            _check_gradients(params, context)
            losses.append(loss.item())

            if (position + 1) % train_cfg.batch_size == 0 or position + 1 == len(order):
                if train_cfg.grad_clip is not None:
                    clip_grad_norm(params, train_cfg.grad_clip)
                adam_step(params, {name: t.grad for name, t in params}, state, lr)
                _check_parameters(params, context)
                params.zero_grad()

        train_loss = float(np.mean(losses))
        valid_loss, valid_accuracy = validation_pass(params, valid_set, alpha, workers)
        if not math.isfinite(valid_loss):
            raise NumericalError(f"Validation loss is {valid_loss} at epoch {epoch}.")

        improved = stopper.update(epoch, valid_loss)
        if improved:
            save_checkpoint(best_path, params, metadata={'epoch': epoch, 'valid_loss': valid_loss, 'alpha': alpha})

        row = {'epoch': epoch, 'train_loss': train_loss, 'valid_loss': valid_loss,
               'valid_accuracy': valid_accuracy, 'lr': lr}
        records.append(row)
        history = pd.DataFrame(records, columns=METRIC_COLUMNS)
        write_metrics(history, metrics_path)
        _save_last(last_path, params, state, epoch, stopper, alpha)
        logger.info(f"Epoch {epoch}: train {train_loss:.6g}, valid {valid_loss:.6g}, "
                    f"accuracy {valid_accuracy:.3f}, lr {lr:.3g}{' (best)' if improved else ''}")
        if on_epoch_end is not None:
            on_epoch_end(epoch, row)

    if stopper.should_stop:
        logger.info(f"Early stopping at epoch {epoch}: no validation improvement for {train_cfg.patience} epochs")

    best = load_checkpoint(best_path)
    return TrainResult(params=best.params, history=history, best_epoch=stopper.best_epoch,
                       best_valid_loss=stopper.best_loss, stopped_early=stopper.should_stop,
                       checkpoint_path=best_path)
