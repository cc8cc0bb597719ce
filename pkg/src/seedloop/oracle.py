"""Simulated annotator backed by ground-truth labels.

Stands in for a human during unattended runs: answers every batch item from a
ground-truth map, optionally flips a seeded fraction of labels to model
annotator error, and charges a per-item time cost that grows when the model's
suggestion disagrees with the assigned label (disagreements need a closer
look).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .acquisition import AcquisitionBatch
from .dataset import CANONICAL_CLASSES, Dataset
from .seeds import derive_seed


class OracleError(LookupError):
    """Raised when the oracle cannot answer for a batch item."""


@dataclass(frozen=True)
class OracleConfig:
    """Ground truth plus noise and latency models for a simulated annotator."""

    ground_truth: dict[str, str]
    noise_rate: float = 0.0
    base_ms: int = 800
    disagree_extra_ms: int = 400
    seed: int = 0
    classes: tuple[str, ...] = CANONICAL_CLASSES
    annotator_id: str = "oracle"

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError(f"noise_rate must be in [0, 1), got {self.noise_rate}")
        if self.base_ms < 0 or self.disagree_extra_ms < 0:
            raise ValueError("latency parameters must be >= 0")
        bad = sorted(set(self.ground_truth.values()) - set(self.classes))
        if bad:
            raise ValueError(f"ground truth contains labels outside {self.classes}: {bad}")


def oracle_from_dataset(dataset: Dataset, **kwargs) -> OracleConfig:
    """OracleConfig whose ground truth is the dataset's labels."""
    truth = {}
    for rec in dataset.records:
        if rec.label is None:
            raise ValueError(f"record {rec.id!r} is unlabeled; cannot serve as ground truth")
        truth[rec.id] = rec.label
    return OracleConfig(ground_truth=truth, **kwargs)


def annotate_detailed(
    batch: AcquisitionBatch, oracle: OracleConfig
) -> tuple[dict[str, str], dict[str, int]]:
    """Labels plus per-item elapsed milliseconds for one batch.

    Noise flips are drawn from a stream seeded by (oracle.seed, batch.cycle),
    so replaying a cycle reproduces the same answers.
    """
    rng = random.Random(derive_seed(oracle.seed, "oracle", batch.cycle))
    labels: dict[str, str] = {}
    per_item_ms: dict[str, int] = {}
    for item in batch.items:
        try:
            truth = oracle.ground_truth[item.id]
        except KeyError:
            raise OracleError(f"no ground-truth label for batch item {item.id!r}") from None
        assigned = truth
        if oracle.noise_rate and rng.random() < oracle.noise_rate:
            others = [c for c in oracle.classes if c != truth]
            assigned = rng.choice(others)
        labels[item.id] = assigned
        cost = oracle.base_ms
        if item.suggested_label != assigned:
            cost += oracle.disagree_extra_ms
        per_item_ms[item.id] = cost
    return labels, per_item_ms


def simulated_annotate(
    batch: AcquisitionBatch, oracle: OracleConfig
) -> tuple[dict[str, str], int]:
    """Labels and total elapsed ms: sum of base_ms + disagree_extra_ms when
    the model suggestion differs from the assigned label."""
    labels, per_item_ms = annotate_detailed(batch, oracle)
    return labels, sum(per_item_ms.values())


def oracle_annotator(oracle: OracleConfig):
    """Adapter matching the loop's annotator protocol."""

    def annotate(batch: AcquisitionBatch) -> tuple[dict[str, str], dict[str, int]]:
        return annotate_detailed(batch, oracle)

    return annotate
