"""Mini-batch training with early stopping on validation loss."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from ..numkit import make_optimizer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 5
    optimizer: str = "sgd"
    lr: float = 1e-4


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1


def fit(model, train, val, config: TrainConfig, rng: np.random.Generator) -> History:
    """Train ``model`` in place on ``train=(x, e, y)``; keep the best-val-loss params.

    Raises ``TrainingError`` when a loss or gradient turns non-finite.
    """
    x, e, y = train
    xv, ev, yv = val
    opt = make_optimizer(config.optimizer, model.store, config.lr)
    hist = History()
    best = np.inf
    best_state = model.store.state_dict()
    stale = 0
    n = len(y)
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            loss = model.loss_and_grad(x[idx], None if e is None else e[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            opt.step()
            total += loss * len(idx)
        hist.train_loss.append(total / n)
        v = model.loss(xv, ev, yv) if len(yv) else hist.train_loss[-1]
        if not np.isfinite(v):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        hist.val_loss.append(v)
        log.debug("epoch %d train %.5f val %.5f", epoch, hist.train_loss[-1], v)
        if v < best:
            best, stale, hist.best_epoch = v, 0, epoch
            best_state = model.store.state_dict()
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.store.load_state_dict(best_state)
    return hist
