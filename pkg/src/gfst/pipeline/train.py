"""Mini-batch training with Adam and early stopping on validation MSE."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError
from ..model import GFSTModel, forward, save_checkpoint
from ..numerics import Tensor, no_grad
from ..numerics.optim import Adam, AdamConfig
from .config import RunConfig
from .data import Dataset
from .windows import AdjacencyCache, WindowSet

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: GFSTModel
    curve: list[dict] = field(default_factory=list)  # one entry per epoch
    best_epoch: int = 0
    best_val: float = float("inf")
    initial_val: float = float("inf")
    wall_time_s: float = 0.0

    def curve_doc(self, cfg: RunConfig) -> dict:
        return {"config_hash": cfg.digest(), "seed": cfg.train.seed, "best_epoch": self.best_epoch,
                "initial_val_mse": self.initial_val, "best_val_mse": self.best_val, "epochs": self.curve}


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    err = pred - Tensor(target)
    return (err * err).mean()


def learning_rate(tc, step: int, total: int) -> float:
    if tc.schedule == "constant":
        return tc.lr
    frac = min(step / max(total - 1, 1), 1.0)
    return tc.lr * (tc.lr_floor + (1 - tc.lr_floor) * 0.5 * (1 + np.cos(np.pi * frac)))


def validation_mse(model: GFSTModel, windows: WindowSet, batch_size: int = 64) -> float:
    total, count = 0.0, 0
    with no_grad():
        for _, x, y, adj in windows.batches(batch_size):
            err = forward(model, x, adj).data - y
            total += float(np.sum(err * err))
            count += err.size
    return total / count


def train(cfg: RunConfig, ds: Dataset, model: GFSTModel | None = None) -> TrainResult:
    """Fit ``cfg.model`` on the train split; returns the best-validation weights.

    Each epoch draws ``steps_per_epoch`` batches from a seeded permutation of
    the training origins (all of them when ``steps_per_epoch`` is 0).
    """
    tc = cfg.train
    t0 = time.perf_counter()
    model = model or GFSTModel(cfg.model)
    cache = AdjacencyCache(ds, cfg.graph)
    train_w = WindowSet(ds, cfg.model, cfg.graph, "train", adjacency=cache)
    val_w = WindowSet(ds, cfg.model, cfg.graph, "val", stride=tc.val_stride, adjacency=cache)
    params = model.named_parameters()
    opt = Adam(params, AdamConfig(tc.lr, tc.beta1, tc.beta2, tc.eps, tc.grad_clip or None))
    rng = np.random.default_rng(tc.seed)

    result = TrainResult(model)
    result.initial_val = validation_mse(model, val_w)
    result.best_val = result.initial_val
    best_state = model.state_dict()
    stale = 0
    per_epoch = tc.steps_per_epoch or -(-len(train_w) // tc.batch_size)
    total = per_epoch * tc.epochs
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(train_w.origins)
        need = per_epoch * tc.batch_size
        while len(order) < need:
            order = np.concatenate([order, rng.permutation(train_w.origins)])
        losses = []
        for step in range(per_epoch):
            o = order[step * tc.batch_size:(step + 1) * tc.batch_size]
            opt.lr = learning_rate(tc, (epoch - 1) * per_epoch + step, total)
            opt.zero_grad()
            loss = mse_loss(forward(model, train_w.inputs(o), train_w.graph(o)), train_w.targets(o))
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError(f"training diverged at epoch {epoch}, step {step}: loss {value}")
            loss.backward()
            gnorm = opt.grad_norm()
            if not np.isfinite(gnorm):
                raise NumericalError(f"non-finite gradient norm at epoch {epoch}, step {step}")
            opt.step()
            losses.append(value)
        val = validation_mse(model, val_w)
        if not np.isfinite(val):
            raise NumericalError(f"validation loss is {val} after epoch {epoch}")
        entry = {"epoch": epoch, "train_mse": float(np.mean(losses)), "val_mse": val}
        result.curve.append(entry)
        log.info("epoch %d  train %.5f  val %.5f", epoch, entry["train_mse"], val)
        if val < result.best_val:
            result.best_val, result.best_epoch = val, epoch
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= tc.patience:
                log.info("early stop after epoch %d (best %d)", epoch, result.best_epoch)
                break
    model.load_state_dict(best_state)
    result.wall_time_s = time.perf_counter() - t0
    return result


def save_run(result: TrainResult, cfg: RunConfig, path) -> None:
    save_checkpoint(result.model, path, {"config_hash": cfg.digest(), "seed": cfg.train.seed,
                                         "run_config": cfg.to_dict()})
