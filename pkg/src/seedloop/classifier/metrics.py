"""Evaluation: confusion matrix, classwise accuracy, view fusion, purity collapse."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import CANONICAL_CLASSES, Dataset, DatasetError, physical_purity_map
from .models import ClassifierModel
from .training import labels_to_indices

FUSE_RULES = ("mean", "max", "product")


def fuse_pair(top: np.ndarray, bottom: np.ndarray, rule: str = "mean") -> np.ndarray:
    """Combine the two independent per-view predictions into one vector."""
    top = np.asarray(top, dtype=np.float64)
    bottom = np.asarray(bottom, dtype=np.float64)
    if rule == "mean":
        return (top + bottom) / 2.0
    if rule == "max":
        fused = np.maximum(top, bottom)
    elif rule == "product":
        fused = top * bottom
    else:
        raise ValueError(f"unknown fusion rule {rule!r}; choose from {FUSE_RULES}")
    s = fused.sum()
    if s <= 0:
        return np.full_like(fused, 1.0 / len(fused))
    return fused / s


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows = ground truth, columns = predicted
    classwise_accuracy: dict[str, float]  # classes with no ground-truth rows are absent
    physical_purity_accuracy: float
    classes: tuple[str, ...]

    @property
    def n_evaluated(self) -> int:
        return int(self.confusion.sum())

    def to_text(self) -> str:
        lines = [
            f"evaluated: {self.n_evaluated}",
            f"accuracy: {self.accuracy:.4f}",
            f"physical_purity_accuracy: {self.physical_purity_accuracy:.4f}",
            "classwise_accuracy:",
        ]
        for c in self.classes:
            if c in self.classwise_accuracy:
                lines.append(f"  {c}: {self.classwise_accuracy[c]:.4f}")
            else:
                lines.append(f"  {c}: (no ground-truth records)")
        width = max(len(c) for c in self.classes) + 2
        header = " " * width + "".join(f"{c[:8]:>10}" for c in self.classes)
        lines.append("confusion (rows=truth, cols=predicted):")
        lines.append(header)
        for i, c in enumerate(self.classes):
            row = "".join(f"{int(v):>10}" for v in self.confusion[i])
            lines.append(f"{c:<{width}}" + row)
        return "\n".join(lines)


def confusion_report(y_true: np.ndarray, y_pred: np.ndarray,
                     classes: Sequence[str] = CANONICAL_CLASSES,
                     pure_class: str = "pure") -> EvalReport:
    """Build the full report from integer class indices."""
    k = len(classes)
    confusion = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[int(t), int(p)] += 1
    total = confusion.sum()
    if total == 0:
        raise DatasetError("cannot evaluate zero records")
    accuracy = float(np.trace(confusion) / total)

    classwise: dict[str, float] = {}
    for i, c in enumerate(classes):
        row = confusion[i].sum()
        if row > 0:
            classwise[c] = float(confusion[i, i] / row)

    purity = [physical_purity_map(c, pure_class) for c in classes]
    binary_correct = sum(
        int(confusion[i, j]) for i in range(k) for j in range(k) if purity[i] == purity[j]
    )
    return EvalReport(
        accuracy=accuracy,
        confusion=confusion,
        classwise_accuracy=classwise,
        physical_purity_accuracy=float(binary_correct / total),
        classes=tuple(classes),
    )


def evaluate(model: ClassifierModel, dataset: Dataset,
             classes: Sequence[str] = CANONICAL_CLASSES,
             fuse_views: bool = False, fuse_rule: str = "mean") -> EvalReport:
    """Evaluate argmax predictions against ground truth.

    With ``fuse_views`` the probability vectors of records sharing a pair_id
    are fused before the argmax, giving each physical seed two (identical)
    fused predictions.
    """
    if len(dataset) == 0:
        raise DatasetError("cannot evaluate an empty dataset")
    records = dataset.records
    y_true = labels_to_indices(records, classes)
    probs = model.predict_proba(records)

    if fuse_views:
        by_pair: dict[str, list[int]] = defaultdict(list)
        for i, rec in enumerate(records):
            if rec.pair_id is not None:
                by_pair[rec.pair_id].append(i)
        probs = probs.copy()
        for members in by_pair.values():
            if len(members) == 2:
                i, j = members
                fused = fuse_pair(probs[i], probs[j], rule=fuse_rule)
                probs[i] = fused
                probs[j] = fused

    y_pred = probs.argmax(axis=1)  # ties resolve to the lowest canonical index
    return confusion_report(y_true, y_pred, classes)
