"""Batch acquisition: entropy ranking, k-means diversity, nearest-to-center picks.

One cycle's query is assembled by ranking the unlabeled pool by predictive
entropy, keeping the top K most uncertain items, clustering those into B
groups, and querying the pool point closest to each cluster center. Every
step is seeded and tie-broken so a batch can be replayed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classifier.models import ClassifierModel
from .classifier.training import records_to_array
from .dataset import CANONICAL_CLASSES, Dataset

STRATEGIES = ("entropy_kmeans", "entropy_top", "random")


class AcquisitionError(ValueError):
    pass


def predictive_entropy(p: np.ndarray) -> float:
    """Shannon entropy -sum(p ln p) in nats, with 0 ln 0 taken as 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class PoolItem:
    id: str
    features: np.ndarray = field(compare=False, repr=False)
    probs: np.ndarray = field(compare=False, repr=False)
    entropy: float

    def __post_init__(self) -> None:
        if abs(self.entropy - predictive_entropy(self.probs)) > 1e-9:
            raise AcquisitionError(f"pool item {self.id!r}: cached entropy disagrees with probs")

    @classmethod
    def from_probs(cls, id: str, features: np.ndarray, probs: np.ndarray) -> "PoolItem":
        return cls(id=id, features=np.asarray(features, dtype=np.float64),
                   probs=np.asarray(probs, dtype=np.float64),
                   entropy=predictive_entropy(probs))


@dataclass(frozen=True)
class AcquisitionConfig:
    top_k: int = 5000
    batch_size: int = 1000
    kmeans_max_iters: int = 100
    seed: int = 0
    feature_source: str = "model_embedding"  # or "raw_pixels"
    strategy: str = "entropy_kmeans"  # "entropy_top" (ablation) / "random" (baseline)

    def __post_init__(self) -> None:
        if self.top_k < 1 or self.batch_size < 1:
            raise AcquisitionError("top_k and batch_size must be positive")
        if self.batch_size > self.top_k:
            raise AcquisitionError("batch_size must not exceed top_k")
        if self.feature_source not in ("model_embedding", "raw_pixels"):
            raise AcquisitionError(f"unknown feature_source {self.feature_source!r}")
        if self.strategy not in STRATEGIES:
            raise AcquisitionError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")


@dataclass(frozen=True)
class BatchItem:
    id: str
    suggested_label: str
    entropy: float


@dataclass(frozen=True)
class AcquisitionBatch:
    items: tuple[BatchItem, ...]
    cycle: int = 0

    def ids(self) -> list[str]:
        return [it.id for it in self.items]

    def __len__(self) -> int:
        return len(self.items)


def top_k_entropy(pool: Sequence[PoolItem], k: int) -> list[PoolItem]:
    """The min(k, |pool|) highest-entropy items, descending; ties by ascending id."""
    if k < 0:
        raise AcquisitionError("k must be >= 0")
    ranked = sorted(pool, key=lambda it: (-it.entropy, it.id))
    return ranked[:k]


def _kmeanspp_init(x: np.ndarray, b: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = np.empty((b, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, b):
        total = d2.sum()
        if total <= 0:
            # All remaining points coincide with a chosen center.
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans(features: Sequence[np.ndarray] | np.ndarray, b: int,
           max_iters: int = 100, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded k-means++ then Lloyd iterations until assignments stabilize.

    Empty clusters are repaired by moving in the point farthest from its
    current center (preferring donors from multi-point clusters). All
    tie-breaks are index-deterministic, so results are replayable per seed.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise AcquisitionError(f"features must be a 2-D array, got shape {x.shape}")
    n = len(x)
    if not 1 <= b <= n:
        raise AcquisitionError(f"cluster count {b} must be in [1, {n}]")

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(x, b, rng)
    assign = np.full(n, -1, dtype=np.int64)

    for _ in range(max_iters):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)

        counts = np.bincount(new_assign, minlength=b)
        for j in np.flatnonzero(counts == 0):
            dist_own = d2[np.arange(n), new_assign]
            donors = counts[new_assign] > 1
            pick_from = dist_own.copy()
            if donors.any():
                pick_from[~donors] = -np.inf
            i = int(pick_from.argmax())
            counts[new_assign[i]] -= 1
            new_assign[i] = j
            counts[j] = 1
            centers[j] = x[i]

        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(b):
            members = x[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)

    return centers, assign


def wcss(features: np.ndarray, centers: np.ndarray, assignment: np.ndarray) -> float:
    """Within-cluster sum of squared distances."""
    x = np.asarray(features, dtype=np.float64)
    return float(((x - centers[assignment]) ** 2).sum())


def nearest_to_centers(candidates: Sequence[PoolItem], centers: np.ndarray) -> list[PoolItem]:
    """For each center in order, the nearest not-yet-selected candidate.

    Distance ties break by ascending id; output length is
    min(|centers|, |candidates|).
    """
    if len(candidates) == 0:
        raise AcquisitionError("candidates must be non-empty")
    feats = np.asarray([c.features for c in candidates], dtype=np.float64)
    # Stable candidate ordering by id so distance ties resolve consistently.
    id_order = sorted(range(len(candidates)), key=lambda i: candidates[i].id)
    taken: set[int] = set()
    picked: list[PoolItem] = []
    for center in np.asarray(centers, dtype=np.float64):
        if len(taken) == len(candidates):
            break
        d2 = ((feats - center) ** 2).sum(axis=1)
        best = None
        best_d = np.inf
        for i in id_order:
            if i in taken:
                continue
            if d2[i] < best_d:
                best_d = d2[i]
                best = i
        taken.add(best)
        picked.append(candidates[best])
    return picked


def _suggested(classes: Sequence[str], probs: np.ndarray) -> str:
    return classes[int(np.asarray(probs).argmax())]


def acquire_from_pool(pool: Sequence[PoolItem], config: AcquisitionConfig,
                      cycle: int = 0, classes: Sequence[str] = CANONICAL_CLASSES
                      ) -> AcquisitionBatch:
    """Run the selection strategy over prepared pool items."""
    if len(pool) == 0:
        raise AcquisitionError("cannot acquire from an empty pool")

    if config.strategy == "random":
        rng = np.random.default_rng(config.seed)
        n = min(config.batch_size, len(pool))
        ordered = sorted(pool, key=lambda it: it.id)
        chosen = [ordered[i] for i in rng.choice(len(ordered), size=n, replace=False)]
    else:
        top = top_k_entropy(pool, min(config.top_k, len(pool)))
        if config.strategy == "entropy_top":
            chosen = top[:config.batch_size]
        else:
            b = min(config.batch_size, len(top))
            feats = np.asarray([it.features for it in top], dtype=np.float64)
            centers, _ = kmeans(feats, b, max_iters=config.kmeans_max_iters, seed=config.seed)
            chosen = nearest_to_centers(top, centers)

    items = tuple(
        BatchItem(id=it.id, suggested_label=_suggested(classes, it.probs), entropy=it.entropy)
        for it in chosen
    )
    return AcquisitionBatch(items=items, cycle=cycle)


def build_pool_items(model: ClassifierModel, unlabeled: Dataset,
                     feature_source: str = "model_embedding") -> list[PoolItem]:
    """Score every pool record with the current model."""
    records = unlabeled.records
    if feature_source == "model_embedding":
        probs, feats = model.predict_with_embeddings(records)
    else:
        probs = model.predict_proba(records)
        feats = records_to_array(records, model.spec.input_resolution).reshape(len(records), -1)
    return [PoolItem.from_probs(rec.id, feats[i], probs[i]) for i, rec in enumerate(records)]


def acquire_batch(model: ClassifierModel, unlabeled: Dataset, config: AcquisitionConfig,
                  cycle: int = 0, classes: Sequence[str] = CANONICAL_CLASSES
                  ) -> AcquisitionBatch:
    """Full acquisition for one cycle; deterministic given model and seed."""
    if len(unlabeled) == 0:
        raise AcquisitionError("cannot acquire from an empty unlabeled pool")
    pool = build_pool_items(model, unlabeled, config.feature_source)
    return acquire_from_pool(pool, config, cycle=cycle, classes=classes)
