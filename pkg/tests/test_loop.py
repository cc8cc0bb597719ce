"""Active-learning loop orchestration: cycles, journaling, resume."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from seedloop.acquisition import AcquisitionConfig
from seedloop.classifier import ModelSpec, TrainConfig, init_model
from seedloop.dataset import Dataset, DatasetError, load_manifest, strip_labels
from seedloop.journal import journal_replay, replay_partition
from seedloop.loop import (
    CycleRecord,
    LoopConfig,
    LoopError,
    LoopState,
    complete_cycle,
    journal_label,
    prepare_cycle,
    record_from_obj,
    record_to_obj,
    resume,
    run,
    run_cycle,
    start_run,
)
from seedloop.oracle import oracle_annotator


def small_config(seed: int = 0, batch: int = 4) -> LoopConfig:
    return LoopConfig(
        model_spec=ModelSpec(input_resolution=(16, 16)),
        train_config=TrainConfig(max_epochs=2, early_stop_patience=1, batch_size=16),
        acquisition=AcquisitionConfig(top_k=12, batch_size=batch),
        seed=seed,
    )


def fresh_state(loop_inputs, tmp_path: Path, name: str, seed: int = 0) -> LoopState:
    labeled, pool, val, _ = loop_inputs
    return start_run(labeled, pool, val, small_config(seed=seed), tmp_path / name)


# ---------------------------------------------------------------- records


def test_cycle_record_validation_and_round_trip():
    rec = CycleRecord(cycle=2, val_accuracy=0.75, annotation_seconds=3.2,
                      labels_added=4, labeled_total=20)
    assert record_from_obj(record_to_obj(rec)) == rec
    with pytest.raises(LoopError):
        CycleRecord(cycle=-1, val_accuracy=0.5, annotation_seconds=0,
                    labels_added=0, labeled_total=0)
    with pytest.raises(LoopError):
        CycleRecord(cycle=0, val_accuracy=1.5, annotation_seconds=0,
                    labels_added=0, labeled_total=0)
    with pytest.raises(LoopError):
        CycleRecord(cycle=0, val_accuracy=0.5, annotation_seconds=-1,
                    labels_added=0, labeled_total=0)


# ---------------------------------------------------------------- start_run


def test_start_run_writes_snapshots(loop_inputs, tmp_path):
    state = fresh_state(loop_inputs, tmp_path, "run")
    out = state.out_dir
    for fname in ("config.json", "labeled.jsonl", "pool.jsonl", "val.jsonl", "journal.jsonl"):
        assert (out / fname).exists()
    assert (out / "images").is_dir()
    assert state.cycle == 0
    assert state.history == []
    assert journal_replay(state.journal_path) == ([], False)
    # snapshots reload to the same id sets
    assert load_manifest(out / "labeled.jsonl").ids() == state.labeled.ids()
    assert load_manifest(out / "pool.jsonl").ids() == state.unlabeled.ids()


def test_start_run_refuses_existing_run(loop_inputs, tmp_path):
    fresh_state(loop_inputs, tmp_path, "run")
    labeled, pool, val, _ = loop_inputs
    with pytest.raises(LoopError, match="already holds a run"):
        start_run(labeled, pool, val, small_config(), tmp_path / "run")


def test_start_run_rejects_overlaps_and_unlabeled(loop_inputs, tmp_path):
    labeled, pool, val, _ = loop_inputs
    with pytest.raises(DatasetError, match="overlap on ids"):
        start_run(labeled, pool, labeled, small_config(), tmp_path / "bad1")
    with pytest.raises(DatasetError, match="unlabeled record"):
        start_run(strip_labels(labeled), pool, val, small_config(), tmp_path / "bad2")


# ---------------------------------------------------------------- one cycle


def test_run_cycle_moves_batch_and_records_metrics(loop_inputs, tmp_path):
    labeled, pool, val, oracle = loop_inputs
    state = fresh_state(loop_inputs, tmp_path, "run")
    before_total = len(state.labeled) + len(state.unlabeled)
    record = run_cycle(state, oracle_annotator(oracle))

    assert record.cycle == 0
    assert record.labels_added == 4
    assert record.labeled_total == len(labeled) + 4 == len(state.labeled)
    assert 0.0 <= record.val_accuracy <= 1.0
    assert len(state.labeled) + len(state.unlabeled) == before_total
    assert state.val.ids() == val.ids()
    assert state.cycle == 1

    events, truncated = journal_replay(state.journal_path)
    assert not truncated
    assert len(events) == 4
    # noise-free oracle: journaled labels match ground truth
    for ev in events:
        assert ev.assigned_label == oracle.ground_truth[ev.image_id]
        assert ev.cycle == 0
        assert ev.annotator_id == "oracle"
    # annotation time is the sum of journaled per-item costs
    assert record.annotation_seconds == pytest.approx(
        sum(ev.elapsed_ms for ev in events) / 1000.0
    )
    lines = state.metrics_path.read_text().splitlines()
    assert len(lines) == 1
    assert record_from_obj(json.loads(lines[0])) == record


def test_run_multiple_cycles_accumulates(loop_inputs, tmp_path):
    _, _, _, oracle = loop_inputs
    state = fresh_state(loop_inputs, tmp_path, "run")
    records = run(state, oracle_annotator(oracle), cycles=3)
    assert [r.cycle for r in records] == [0, 1, 2]
    assert [r.labeled_total for r in records] == [20, 24, 28]
    assert len(state.unlabeled) == 32 - 12
    assert state.history == records
    with pytest.raises(LoopError, match="cycles"):
        run(state, oracle_annotator(oracle), cycles=0)


def test_pool_exhaustion_clamps_then_stops(loop_inputs, tmp_path):
    labeled, pool, val, oracle = loop_inputs
    small_pool = pool.subset(sorted(pool.ids())[:6])
    state = start_run(labeled, small_pool, val, small_config(), tmp_path / "run")
    records = run(state, oracle_annotator(oracle), cycles=5)
    assert [r.labels_added for r in records] == [4, 2]  # clamped final batch
    assert len(state.unlabeled) == 0
    with pytest.raises(LoopError, match="exhausted"):
        run_cycle(state, oracle_annotator(oracle))


# ---------------------------------------------------------------- errors


def test_pending_batch_discipline(loop_inputs, tmp_path):
    _, _, _, oracle = loop_inputs
    state = fresh_state(loop_inputs, tmp_path, "run")
    with pytest.raises(LoopError, match="no pending batch"):
        complete_cycle(state, {}, 0.0)
    batch, val_acc = prepare_cycle(state)
    assert 0.0 <= val_acc <= 1.0
    with pytest.raises(LoopError, match="pending batch"):
        prepare_cycle(state)
    with pytest.raises(LoopError, match="not part of the pending batch"):
        journal_label(state, "ghost", "pure", 100, "t")
    with pytest.raises(DatasetError, match="not in classes"):
        journal_label(state, batch.ids()[0], "shiny", 100, "t")
    with pytest.raises(LoopError, match="incomplete"):
        complete_cycle(state, {batch.ids()[0]: "pure"}, 1.0)
    full = {i: "pure" for i in batch.ids()}
    with pytest.raises(LoopError, match="outside the batch"):
        complete_cycle(state, {**full, "ghost": "pure"}, 1.0)
    record = complete_cycle(state, full, 1.0)
    assert record.labels_added == len(batch)


def test_annotator_must_label_every_item(loop_inputs, tmp_path):
    state = fresh_state(loop_inputs, tmp_path, "run")

    def lazy_annotator(batch):
        some = batch.ids()[:-1]
        return {i: "pure" for i in some}, {i: 10 for i in some}

    with pytest.raises(LoopError, match="no label for batch item"):
        run_cycle(state, lazy_annotator)


# ---------------------------------------------------------------- resume


def test_resume_requires_a_run(tmp_path):
    with pytest.raises(LoopError, match="missing config.json"):
        resume(tmp_path / "empty")


def test_resume_mid_cycle_keeps_partial_labels(loop_inputs, tmp_path):
    _, _, _, oracle = loop_inputs
    state = fresh_state(loop_inputs, tmp_path, "run")
    run_cycle(state, oracle_annotator(oracle))
    batch, _ = prepare_cycle(state)
    partial = batch.ids()[:2]
    for image_id in partial:
        journal_label(state, image_id, oracle.ground_truth[image_id], 500, "oracle")
    # simulate a crash mid-write of the third event
    with open(state.journal_path, "a", encoding="utf-8") as fh:
        fh.write('{"timestamp_ms": 1, "image_id"')

    resumed = resume(state.out_dir)
    assert resumed.cycle == 1  # cycle 1 never completed
    assert len(resumed.history) == 1
    for image_id in partial:
        assert image_id in resumed.labeled.ids()
        assert resumed.labeled.get(image_id).cycle_added == 1
        assert image_id not in resumed.unlabeled.ids()
    assert len(resumed.labeled) + len(resumed.unlabeled) == 16 + 32

    record = run_cycle(resumed, oracle_annotator(oracle))
    assert record.cycle == 1
    assert len(resumed.history) == 2
    # repair dropped the crash artifact, so the journal parses cleanly and the
    # partially labeled ids were never re-acquired (one event each)
    events, truncated = journal_replay(resumed.journal_path)
    assert not truncated
    for image_id in partial:
        assert sum(1 for ev in events if ev.image_id == image_id) == 1


def test_interrupted_run_matches_uninterrupted(loop_inputs, tmp_path):
    _, _, _, oracle = loop_inputs
    straight = fresh_state(loop_inputs, tmp_path, "a", seed=3)
    run(straight, oracle_annotator(oracle), cycles=3)

    broken = fresh_state(loop_inputs, tmp_path, "b", seed=3)
    run(broken, oracle_annotator(oracle), cycles=2)
    resumed = resume(broken.out_dir)
    run(resumed, oracle_annotator(oracle), cycles=1)

    assert resumed.history == straight.history  # exact float equality
    assert resumed.labeled.ids() == straight.labeled.ids()
    assert resumed.unlabeled.ids() == straight.unlabeled.ids()
    for rec in straight.labeled:
        assert resumed.labeled.get(rec.id).label == rec.label


def test_cycle_training_has_no_dependence_on_previous_model(loop_inputs, tmp_path):
    _, _, _, oracle = loop_inputs
    clean = fresh_state(loop_inputs, tmp_path, "clean", seed=1)
    sabotaged = fresh_state(loop_inputs, tmp_path, "sabotaged", seed=1)

    first_clean = run_cycle(clean, oracle_annotator(oracle))
    first_sab = run_cycle(sabotaged, oracle_annotator(oracle))
    assert first_clean == first_sab
    # replace the carried model with garbage; the next cycle retrains from
    # fresh derived-seed weights, so nothing changes
    sabotaged.model = init_model(ModelSpec(input_resolution=(16, 16), init_seed=999))
    second_clean = run_cycle(clean, oracle_annotator(oracle))
    second_sab = run_cycle(sabotaged, oracle_annotator(oracle))
    assert second_clean == second_sab


def test_journal_replay_reconstructs_live_partition(loop_inputs, tmp_path):
    _, _, _, oracle = loop_inputs
    state = fresh_state(loop_inputs, tmp_path, "run")
    run(state, oracle_annotator(oracle), cycles=2)

    initial_labeled = load_manifest(state.out_dir / "labeled.jsonl")
    initial_pool = load_manifest(state.out_dir / "pool.jsonl")
    events, _ = journal_replay(state.journal_path)
    labeled, pool = replay_partition(initial_labeled, initial_pool, events)
    assert labeled.ids() == state.labeled.ids()
    assert pool.ids() == state.unlabeled.ids()
    for rec in state.labeled:
        assert labeled.get(rec.id).label == rec.label
    # and the cycle-0 prefix reconstructs the intermediate partition
    labeled0, pool0 = replay_partition(initial_labeled, initial_pool, events, through_cycle=0)
    assert len(labeled0) == 16 + 4


def test_resume_restores_config_and_history(loop_inputs, tmp_path):
    _, _, _, oracle = loop_inputs
    state = fresh_state(loop_inputs, tmp_path, "run", seed=11)
    run(state, oracle_annotator(oracle), cycles=2)
    resumed = resume(state.out_dir)
    assert resumed.config == state.config
    assert resumed.history == state.history
    assert resumed.cycle == 2
