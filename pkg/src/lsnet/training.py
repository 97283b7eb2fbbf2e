"""Supervised training: Adam with per-epoch exponential learning-rate decay."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericError, ParameterError
from .unrolled import LsNetParams, lsnet_backward, lsnet_forward, loss_mse

logger = logging.getLogger(__name__)

__all__ = [
    "AdamState",
    "TrainConfig",
    "TrainRecord",
    "adam_step",
    "lr_at_epoch",
    "train",
    "train_epoch",
]


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays, **kw) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kw)


def adam_step(params: list, grads: list, state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update applied in place to ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ParameterError("params, grads and optimizer state must align")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient passed to the optimizer")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ParameterError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr0: float = 1e-3
    decay: float = 0.95
    batch_size: int = 1
    seed: int = 0
    shuffle: bool = False
    divergence_factor: float = 100.0

    def validate(self):
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if not self.lr0 > 0:
            raise ParameterError("lr0 must be > 0")
        if not 0 < self.decay <= 1:
            raise ParameterError("decay must be in (0, 1]")
        if self.batch_size != 1:
            raise ParameterError("only batch_size=1 is supported")


@dataclass
class TrainRecord:
    losses: list = field(default_factory=list)  # epoch-mean loss
    lrs: list = field(default_factory=list)
    epoch: int = 0  # epochs completed
    adam: AdamState | None = None
    diverged: bool = False
    plateaued: bool = False


def lr_at_epoch(e: int, cfg: TrainConfig) -> float:
    if e < 0:
        raise ParameterError("epoch must be >= 0")
    return cfg.lr0 * cfg.decay**e


def _sample_order(n, cfg: TrainConfig, epoch: int) -> np.ndarray:
    if not cfg.shuffle:
        return np.arange(n)
    return np.random.default_rng([cfg.seed, epoch]).permutation(n)


def train_epoch(params: LsNetParams, data, cfg: TrainConfig, record: TrainRecord) -> float:
    """One pass over ``data`` (a sequence of samples with ``y``, ``op``,
    ``x_ref``). Updates ``params`` and ``record`` in place; returns the mean loss."""
    lr = lr_at_epoch(record.epoch, cfg)
    if record.adam is None:
        record.adam = AdamState.zeros_like(params.arrays())
    total = 0.0
    for i in _sample_order(len(data), cfg, record.epoch):
        sample = data[i]
        X, _, _, tape = lsnet_forward(sample.y, sample.op, params)
        loss, g = loss_mse(X, sample.x_ref)
        grads = lsnet_backward(tape, g)
        adam_step(params.arrays(), grads.arrays(), record.adam, lr)
        total += loss
    mean = total / len(data)
    record.losses.append(mean)
    record.lrs.append(lr)
    record.epoch += 1
    return mean


def train(params: LsNetParams, data, cfg: TrainConfig, record: TrainRecord | None = None,
          callback=None):
    """Train ``params`` (in place) for ``cfg.epochs`` epochs, or until
    ``record.epoch`` reaches ``cfg.epochs`` when resuming.

    ``callback(epoch, params, record)`` runs after every epoch. Training stops
    with ``record.diverged`` set when an epoch-mean loss exceeds
    ``divergence_factor`` times the first one.

    Returns ``(params, record)``.
    """
    cfg.validate()
    if len(data) == 0:
        raise ParameterError("training set is empty")
    record = TrainRecord() if record is None else record
    while record.epoch < cfg.epochs:
        mean = train_epoch(params, data, cfg, record)
        logger.info("epoch %d  loss %.6e  lr %.3e", record.epoch, mean, record.lrs[-1])
        if callback is not None:
            callback(record.epoch, params, record)
        if not np.isfinite(mean) or mean > cfg.divergence_factor * record.losses[0]:
            record.diverged = True
            logger.warning("training diverged at epoch %d (loss %.3e)", record.epoch, mean)
            break
    if len(record.losses) >= 2 and record.losses[-1] >= record.losses[-2]:
        record.plateaued = True
        logger.info("loss did not decrease in the last epoch")
    return params, record
