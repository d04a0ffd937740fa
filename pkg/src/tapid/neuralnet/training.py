"""Multi-class pre-training with Adam and early stopping."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InvalidInputError
from . import layers as L
from .model import Checkpoint, NetworkSpec, backward, build_network, forward, images_to_batch
from .optim import adam_step, init_adam_state

log = logging.getLogger(__name__)

LOG_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    patience: int = 5
    seed: int = 0
    runs: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.runs < 1:
            raise InvalidInputError("epochs, batch_size and runs must be >= 1")
        if self.patience < 0:
            raise InvalidInputError("patience must be >= 0")


def _as_pixels(images) -> np.ndarray:
    if isinstance(images, np.ndarray):
        return images
    return np.stack([np.asarray(getattr(im, "pixels", im)) for im in images])


def evaluate(ckpt: Checkpoint, pixels, labels, batch_size: int = 128) -> tuple[float, float]:
    """Inference-mode (loss, accuracy) over a labelled image set."""
    pixels = _as_pixels(pixels)
    labels = np.asarray(labels)
    total_loss, correct = 0.0, 0
    for start in range(0, len(labels), batch_size):
        batch = images_to_batch(pixels[start : start + batch_size])
        y = labels[start : start + batch_size]
        probs = forward(ckpt, batch).probabilities
        loss, _ = L.cross_entropy(probs, y)
        total_loss += loss * len(y)
        correct += int(np.sum(probs.argmax(axis=1) == y))
    n = max(len(labels), 1)
    return total_loss / n, correct / n


def train_multiclass(spec: NetworkSpec, config: TrainConfig, train_set, val_set, init_seed=None) -> Checkpoint:
    """Train one network and return the weights of its best validation epoch.

    ``train_set`` and ``val_set`` are ``(images, labels)`` pairs with dense
    labels. An epoch improves on the best so far if its validation accuracy
    is higher, or equal with a lower validation loss. Training stops once
    ``patience`` consecutive epochs fail to improve (at the first miss when
    patience is 0).
    """
    if len(train_set[1]) == 0:
        raise InvalidInputError("training set is empty")
    train_px, train_y = _as_pixels(train_set[0]), np.asarray(train_set[1], dtype=np.int64)
    val_y = np.asarray(val_set[1], dtype=np.int64)
    val_px = _as_pixels(val_set[0]) if len(val_y) else np.zeros((0, *spec.input_shape), np.uint8)
    if len(train_px) != len(train_y) or len(val_px) != len(val_y):
        raise InvalidInputError("images and labels differ in length")

    ckpt = build_network(spec, seed=config.seed if init_seed is None else init_seed)
    weights = ckpt.weights
    state = init_adam_state(weights)
    step = 0
    best_acc, best_loss, best_weights, wait = -1.0, float("inf"), weights, 0
    history = []

    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(len(train_y))
        loss_sum, correct = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = images_to_batch(train_px[idx])
            grads, loss, probs = backward(
                ckpt.with_weights(weights), batch, train_y[idx], train_mode=True, rng=rng
            )
            step += 1
            weights, state = adam_step(weights, grads, state, lr=config.learning_rate, t=step)
            loss_sum += loss * len(idx)
            correct += int(np.sum(probs.argmax(axis=1) == train_y[idx]))

        current = ckpt.with_weights(weights)
        val_loss, val_acc = evaluate(current, val_px, val_y) if len(val_y) else (float("nan"), 0.0)
        row = {
            "epoch": epoch,
            "train_loss": loss_sum / len(train_y),
            "train_acc": correct / len(train_y),
            "val_loss": val_loss,
            "val_acc": val_acc,
        }
        history.append(row)
        log.info("epoch %d loss %.4f acc %.4f val_acc %.4f", epoch, row["train_loss"], row["train_acc"], val_acc)

        if val_acc > best_acc or (val_acc == best_acc and val_loss < best_loss):
            best_acc, best_loss, best_weights, wait = val_acc, val_loss, weights, 0
        else:
            wait += 1
            if wait >= max(config.patience, 1):
                break

    return Checkpoint(spec=spec, weights=dict(best_weights), training_log=history)


def best_epoch(ckpt: Checkpoint) -> dict:
    return max(ckpt.training_log, key=lambda r: (r["val_acc"], -r["val_loss"], -r["epoch"]))


def train_runs(spec: NetworkSpec, config: TrainConfig, train_set, val_set):
    """Repeat training ``config.runs`` times with seeds seed, seed+1, ...

    Returns the checkpoint with the highest best-epoch validation accuracy
    (earliest run on ties) and one summary row per run.
    """
    summaries, best = [], None
    for r in range(config.runs):
        run_cfg = replace(config, seed=config.seed + r, runs=1)
        ckpt = train_multiclass(spec, run_cfg, train_set, val_set)
        top = best_epoch(ckpt)
        summaries.append({"run": r, "seed": run_cfg.seed, "epochs_run": len(ckpt.training_log), **top})
        if best is None or top["val_acc"] > best_epoch(best)["val_acc"]:
            best = ckpt
    return best, summaries


def write_training_log(ckpt: Checkpoint, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        writer.writeheader()
        for row in ckpt.training_log:
            writer.writerow({k: row[k] for k in LOG_FIELDS})
