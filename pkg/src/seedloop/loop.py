"""Batch active-learning loop: train, evaluate, acquire, annotate, accumulate.

Each cycle retrains the classifier from fresh weights on everything labeled
so far, scores the model on the held-out validation split, acquires a batch
from the unlabeled pool, journals the annotator's labels and folds them into
the labeled set.  All randomness is derived per cycle from the run seed, so a
run can be interrupted at any point and resumed to the same trajectory.

Run directory layout::

    config.json     model / training / acquisition configuration
    labeled.jsonl   initial labeled snapshot   (images/ holds materialized pixels)
    pool.jsonl      initial unlabeled snapshot
    val.jsonl       validation snapshot
    journal.jsonl   append-only label events
    metrics.jsonl   one CycleRecord per completed cycle
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

from .acquisition import AcquisitionBatch, AcquisitionConfig, acquire_batch
from .classifier.metrics import evaluate
from .classifier.models import ClassifierModel, ModelSpec, TrainConfig, init_model
from .classifier.training import train
from .dataset import CANONICAL_CLASSES, Dataset, DatasetError, load_manifest, save_manifest
from .journal import journal_append, journal_repair, journal_replay, make_event, replay_partition
from .seeds import derive_seed

Annotator = Callable[[AcquisitionBatch], tuple[dict[str, str], dict[str, int]]]


class LoopError(RuntimeError):
    """Raised for invalid loop state transitions or inputs."""


@dataclass(frozen=True)
class CycleRecord:
    """Metrics for one completed cycle."""

    cycle: int
    val_accuracy: float
    annotation_seconds: float
    labels_added: int
    labeled_total: int

    def __post_init__(self) -> None:
        if self.cycle < 0:
            raise LoopError(f"cycle must be >= 0, got {self.cycle}")
        if not 0.0 <= self.val_accuracy <= 1.0:
            raise LoopError(f"val_accuracy must lie in [0, 1], got {self.val_accuracy}")
        if self.annotation_seconds < 0 or self.labels_added < 0 or self.labeled_total < 0:
            raise LoopError("cycle record counts and times must be >= 0")


def record_to_obj(record: CycleRecord) -> dict:
    return asdict(record)


def record_from_obj(obj: dict) -> CycleRecord:
    return CycleRecord(
        cycle=obj["cycle"],
        val_accuracy=obj["val_accuracy"],
        annotation_seconds=obj["annotation_seconds"],
        labels_added=obj["labels_added"],
        labeled_total=obj["labeled_total"],
    )


@dataclass(frozen=True)
class LoopConfig:
    """Static configuration shared by every cycle of a run."""

    model_spec: ModelSpec = field(default_factory=ModelSpec)
    train_config: TrainConfig = field(default_factory=TrainConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    classes: tuple[str, ...] = CANONICAL_CLASSES
    seed: int = 0
    val_source: str = "held-out validation split"


@dataclass
class LoopState:
    """Mutable state of a run; persisted pieces live under out_dir."""

    config: LoopConfig
    out_dir: Path
    labeled: Dataset
    unlabeled: Dataset
    val: Dataset
    cycle: int = 0
    history: list[CycleRecord] = field(default_factory=list)
    pending_batch: AcquisitionBatch | None = None
    pending_val_accuracy: float | None = None
    model: ClassifierModel | None = None

    @property
    def journal_path(self) -> Path:
        return self.out_dir / "journal.jsonl"

    @property
    def metrics_path(self) -> Path:
        return self.out_dir / "metrics.jsonl"


def _check_partition(labeled: Dataset, unlabeled: Dataset, val: Dataset) -> None:
    for name, ds in (("labeled seed", labeled), ("validation", val)):
        for rec in ds:
            if rec.label is None:
                raise DatasetError(f"{name} set contains unlabeled record {rec.id!r}")
    sets = {"labeled": labeled.ids(), "pool": unlabeled.ids(), "val": val.ids()}
    names = list(sets)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            overlap = sets[a] & sets[b]
            if overlap:
                some = sorted(overlap)[:5]
                raise DatasetError(f"{a} and {b} sets overlap on ids {some}")


def _config_to_obj(config: LoopConfig) -> dict:
    return {
        "model_spec": asdict(config.model_spec),
        "train_config": asdict(config.train_config),
        "acquisition": asdict(config.acquisition),
        "classes": list(config.classes),
        "seed": config.seed,
        "val_source": config.val_source,
    }


def _config_from_obj(obj: dict) -> LoopConfig:
    spec_raw = dict(obj["model_spec"])
    spec_raw["input_resolution"] = tuple(spec_raw["input_resolution"])
    return LoopConfig(
        model_spec=ModelSpec(**spec_raw),
        train_config=TrainConfig(**obj["train_config"]),
        acquisition=AcquisitionConfig(**obj["acquisition"]),
        classes=tuple(obj["classes"]),
        seed=obj["seed"],
        val_source=obj.get("val_source", ""),
    )


def start_run(
    labeled: Dataset,
    unlabeled: Dataset,
    val: Dataset,
    config: LoopConfig,
    out_dir: str | Path,
) -> LoopState:
    """Initialize a fresh run directory with snapshots and an empty journal."""
    _check_partition(labeled, unlabeled, val)
    out_dir = Path(out_dir)
    if (out_dir / "config.json").exists():
        raise LoopError(f"{out_dir} already holds a run; resume it or pick a new directory")
    out_dir.mkdir(parents=True, exist_ok=True)
    image_dir = out_dir / "images"
    save_manifest(labeled, out_dir / "labeled.jsonl", image_dir=image_dir)
    save_manifest(unlabeled, out_dir / "pool.jsonl", image_dir=image_dir)
    save_manifest(val, out_dir / "val.jsonl", image_dir=image_dir)
    (out_dir / "config.json").write_text(
        json.dumps(_config_to_obj(config), indent=2) + "\n", encoding="utf-8"
    )
    state = LoopState(config=config, out_dir=out_dir, labeled=labeled, unlabeled=unlabeled, val=val)
    state.journal_path.touch()
    return state


def resume(out_dir: str | Path) -> LoopState:
    """Rebuild run state from snapshots, the journal and completed metrics.

    Labels journaled for an interrupted cycle are kept in the labeled set;
    the unlabeled remainder of that batch returns to the pool and the cycle
    is re-run from its usual derived seeds.
    """
    out_dir = Path(out_dir)
    config_path = out_dir / "config.json"
    if not config_path.exists():
        raise LoopError(f"no run found under {out_dir} (missing config.json)")
    config = _config_from_obj(json.loads(config_path.read_text(encoding="utf-8")))
    labeled = load_manifest(out_dir / "labeled.jsonl")
    pool = load_manifest(out_dir / "pool.jsonl")
    val = load_manifest(out_dir / "val.jsonl")

    history: list[CycleRecord] = []
    metrics_path = out_dir / "metrics.jsonl"
    if metrics_path.exists():
        for line in metrics_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                history.append(record_from_obj(json.loads(line)))

    journal_repair(out_dir / "journal.jsonl")
    events, _truncated = journal_replay(out_dir / "journal.jsonl")
    labeled, pool = replay_partition(labeled, pool, events)
    state = LoopState(
        config=config,
        out_dir=out_dir,
        labeled=labeled,
        unlabeled=pool,
        val=val,
        cycle=len(history),
        history=history,
    )
    return state


def prepare_cycle(state: LoopState) -> tuple[AcquisitionBatch, float]:
    """Train from fresh weights, evaluate, and acquire the next batch."""
    if state.pending_batch is not None:
        raise LoopError(f"cycle {state.cycle} already has a pending batch")
    if not len(state.unlabeled):
        raise LoopError("unlabeled pool is exhausted")
    k = state.cycle
    cfg = state.config
    spec = replace(cfg.model_spec, init_seed=derive_seed(cfg.seed, "init", k))
    model = init_model(spec)
    tcfg = replace(cfg.train_config, seed=derive_seed(cfg.seed, "train", k))
    model, _history = train(model, state.labeled, state.val, tcfg, classes=cfg.classes)
    report = evaluate(model, state.val, classes=cfg.classes)

    pool_n = len(state.unlabeled)
    acq = replace(
        cfg.acquisition,
        seed=derive_seed(cfg.seed, "acquire", k),
        top_k=min(cfg.acquisition.top_k, pool_n),
        batch_size=min(cfg.acquisition.batch_size, cfg.acquisition.top_k, pool_n),
    )
    batch = acquire_batch(model, state.unlabeled, acq, cycle=k, classes=cfg.classes)
    state.model = model
    state.pending_batch = batch
    state.pending_val_accuracy = report.accuracy
    return batch, report.accuracy


def journal_label(
    state: LoopState, image_id: str, assigned: str, elapsed_ms: int, annotator_id: str
) -> None:
    """Append one label decision for the pending batch to the journal."""
    batch = state.pending_batch
    if batch is None:
        raise LoopError("no pending batch to label")
    by_id = {item.id: item for item in batch.items}
    if image_id not in by_id:
        raise LoopError(f"image {image_id!r} is not part of the pending batch")
    if assigned not in state.config.classes:
        raise DatasetError(f"label {assigned!r} not in classes {state.config.classes}")
    event = make_event(
        timestamp_ms=int(time.time() * 1000),
        image_id=image_id,
        assigned_label=assigned,
        suggested_label=by_id[image_id].suggested_label,
        annotator_id=annotator_id,
        cycle=batch.cycle,
        elapsed_ms=elapsed_ms,
    )
    journal_append(state.journal_path, event)


def complete_cycle(
    state: LoopState, labels: dict[str, str], annotation_seconds: float
) -> CycleRecord:
    """Fold a fully labeled batch into the labeled set and record metrics."""
    batch = state.pending_batch
    if batch is None:
        raise LoopError("no pending batch to complete")
    batch_ids = set(batch.ids())
    missing = batch_ids - set(labels)
    if missing:
        raise LoopError(f"batch incomplete: {len(missing)} items still unlabeled")
    extra = set(labels) - batch_ids
    if extra:
        raise LoopError(f"labels for ids outside the batch: {sorted(extra)[:5]}")

    newly = state.unlabeled.subset(labels.keys()).with_labels(labels, cycle_added=batch.cycle)
    state.labeled = state.labeled.union(newly)
    state.unlabeled = state.unlabeled.without_ids(labels.keys())
    record = CycleRecord(
        cycle=batch.cycle,
        val_accuracy=float(state.pending_val_accuracy),
        annotation_seconds=float(annotation_seconds),
        labels_added=len(labels),
        labeled_total=len(state.labeled),
    )
    with open(state.metrics_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record_to_obj(record), separators=(",", ":")) + "\n")
    state.history.append(record)
    state.cycle = batch.cycle + 1
    state.pending_batch = None
    state.pending_val_accuracy = None
    return record


def run_cycle(state: LoopState, annotator: Annotator, annotator_id: str = "oracle") -> CycleRecord:
    """One full train / evaluate / acquire / annotate / accumulate cycle."""
    batch, _val_acc = prepare_cycle(state)
    labels, per_item_ms = annotator(batch)
    for item in batch.items:
        if item.id not in labels:
            raise LoopError(f"annotator returned no label for batch item {item.id!r}")
        journal_label(state, item.id, labels[item.id], per_item_ms.get(item.id, 0), annotator_id)
    return complete_cycle(state, labels, sum(per_item_ms.values()) / 1000.0)


def run(
    state: LoopState, annotator: Annotator, cycles: int, annotator_id: str = "oracle"
) -> list[CycleRecord]:
    """Run consecutive cycles; stops early only if the pool empties."""
    if cycles < 1:
        raise LoopError(f"cycles must be >= 1, got {cycles}")
    records = []
    for _ in range(cycles):
        if not len(state.unlabeled):
            break
        records.append(run_cycle(state, annotator, annotator_id))
    return records
