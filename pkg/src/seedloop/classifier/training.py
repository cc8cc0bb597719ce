"""Training loop with early stopping, plus record-to-array conversion."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from PIL import Image

from ..dataset import CANONICAL_CLASSES, Dataset, DatasetError, ImageRecord, load_pixels
from .models import ClassifierModel, TrainConfig

# Decoded+resized inputs for path-backed records; paths are stable within a
# run, in-memory pixels are cheap enough to convert on the fly.
_PATH_CACHE: dict[tuple[str, int, int], np.ndarray] = {}
_PATH_CACHE_LIMIT = 100_000


def record_input(record: ImageRecord, resolution: tuple[int, int]) -> np.ndarray:
    """Float32 (H, W, 3) array in [0, 1] at the requested resolution."""
    h, w = resolution
    key = None
    if record.pixels is None and record.path is not None:
        key = (record.path, h, w)
        hit = _PATH_CACHE.get(key)
        if hit is not None:
            return hit
    px = load_pixels(record)
    if px.shape[:2] != (h, w):
        px = np.asarray(Image.fromarray(px).resize((w, h), Image.BILINEAR), dtype=np.uint8)
    arr = px.astype(np.float32) / 255.0
    if key is not None:
        if len(_PATH_CACHE) >= _PATH_CACHE_LIMIT:
            _PATH_CACHE.clear()
        _PATH_CACHE[key] = arr
    return arr


def records_to_array(records: Sequence[ImageRecord], resolution: tuple[int, int]) -> np.ndarray:
    h, w = resolution
    out = np.empty((len(records), h, w, 3), dtype=np.float32)
    for i, rec in enumerate(records):
        out[i] = record_input(rec, resolution)
    return out


def labels_to_indices(records: Sequence[ImageRecord],
                      classes: Sequence[str] = CANONICAL_CLASSES) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    out = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        if rec.label is None:
            raise DatasetError(f"record {rec.id!r} is unlabeled")
        out[i] = index[rec.label]
    return out


class EarlyStopper:
    """Track a metric and stop after `patience` epochs without improvement."""

    def __init__(self, patience: int, mode: str = "max"):
        if mode not in ("min", "max"):
            raise ValueError("mode must be 'min' or 'max'")
        self.patience = patience
        self.mode = mode
        self.best = -math.inf if mode == "max" else math.inf
        self.best_epoch = -1
        self.bad_epochs = 0
        self._epoch = -1

    def step(self, value: float) -> bool:
        """Record one epoch's metric; True if it improved on the best so far."""
        self._epoch += 1
        improved = value > self.best if self.mode == "max" else value < self.best
        if improved:
            self.best = value
            self.best_epoch = self._epoch
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        return improved

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def _val_metrics(model: ClassifierModel, val_records: Sequence[ImageRecord],
                 classes: Sequence[str]) -> tuple[float, float]:
    probs = model.predict_proba(val_records)
    y = labels_to_indices(val_records, classes)
    acc = float((probs.argmax(axis=1) == y).mean())
    picked = np.clip(probs[np.arange(len(y)), y], 1e-12, None)
    loss = float(-np.log(picked).mean())
    return acc, loss


def train(model: ClassifierModel, train_set: Dataset, val_set: Dataset,
          config: TrainConfig, classes: Sequence[str] = CANONICAL_CLASSES
          ) -> tuple[ClassifierModel, list[dict[str, float]]]:
    """Fit with early stopping; restores the best-metric epoch's weights.

    Stops at max_epochs or once the early-stop metric has gone
    `early_stop_patience` consecutive epochs without improving. The history
    has one {train_acc, val_acc, val_loss} entry per epoch actually run.
    """
    if len(train_set) == 0:
        raise DatasetError("cannot train on an empty train set")
    if len(val_set) == 0:
        raise DatasetError("validation set must be non-empty")

    images = records_to_array(train_set.records, model.spec.input_resolution)
    labels = labels_to_indices(train_set.records, classes)
    rng = np.random.default_rng(config.seed)
    mode = "max" if config.early_stop_metric == "val_accuracy" else "min"
    stopper = EarlyStopper(config.early_stop_patience, mode=mode)
    best_weights = model.weight_state()
    history: list[dict[str, float]] = []

    for epoch in range(config.max_epochs):
        perm = rng.permutation(len(images))
        train_acc = model.train_epoch(images[perm], labels[perm], config)
        val_acc, val_loss = _val_metrics(model, val_set.records, classes)
        history.append({"epoch": epoch, "train_acc": train_acc,
                        "val_acc": val_acc, "val_loss": val_loss})
        metric = val_acc if config.early_stop_metric == "val_accuracy" else val_loss
        if stopper.step(metric):
            best_weights = model.weight_state()
        if stopper.should_stop:
            break

    model.load_weight_state(best_weights)
    return model, history


def predict_proba(model: ClassifierModel, records: Sequence[ImageRecord]) -> np.ndarray:
    """(N, num_classes) probabilities for the records, in input order."""
    return model.predict_proba(list(records))
