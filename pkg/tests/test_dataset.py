"""Dataset model: records, manifests, class stats, splits, balancing."""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest

from seedloop.dataset import (
    CANONICAL_CLASSES,
    BalancingPlan,
    Dataset,
    DatasetError,
    ImageRecord,
    balancing_plan,
    check_pair_integrity,
    class_stats,
    load_manifest,
    load_pixels,
    physical_purity_map,
    save_manifest,
    strip_labels,
    stratified_split,
)

from conftest import labeled_dataset, tiny_record


# ---------------------------------------------------------------- records


def test_canonical_class_order_is_alphabetic():
    assert CANONICAL_CLASSES == ("broken", "discolored", "pure", "silkcut")
    assert list(CANONICAL_CLASSES) == sorted(CANONICAL_CLASSES)


def test_record_rejects_unknown_view_and_source():
    with pytest.raises(DatasetError, match="view"):
        ImageRecord(id="x", view="side")
    with pytest.raises(DatasetError, match="source"):
        ImageRecord(id="x", source="synthetic")


def test_generated_record_requires_label():
    with pytest.raises(DatasetError, match="conditioning label"):
        ImageRecord(id="x", source="generated", label=None)
    ImageRecord(id="x", source="generated", label="pure")  # fine


def test_negative_cycle_added_rejected():
    with pytest.raises(DatasetError, match="cycle_added"):
        ImageRecord(id="x", cycle_added=-1)


def test_dataset_sorts_by_id_and_rejects_duplicates():
    recs = [tiny_record(3), tiny_record(1), tiny_record(2)]
    ds = Dataset(recs)
    assert [r.id for r in ds] == sorted(r.id for r in recs)
    with pytest.raises(DatasetError, match="duplicate id"):
        Dataset([tiny_record(1), tiny_record(1)])


def test_dataset_subset_union_without_ids():
    ds = Dataset([tiny_record(i) for i in range(5)])
    sub = ds.subset(["r0001", "r0003"])
    assert sorted(sub.ids()) == ["r0001", "r0003"]
    with pytest.raises(DatasetError, match="r9999"):
        ds.subset(["r9999"])
    rest = ds.without_ids(sub.ids())
    assert rest.ids() | sub.ids() == ds.ids()
    assert rest.ids() & sub.ids() == set()
    assert ds.union([]) == ds
    with pytest.raises(DatasetError, match="duplicate"):
        ds.union([tiny_record(0)])


def test_with_labels_sets_label_and_cycle():
    ds = Dataset([tiny_record(0), tiny_record(1, label="pure", pair_id=None)])
    out = ds.with_labels({"r0000": "broken"}, cycle_added=3)
    assert out.get("r0000").label == "broken"
    assert out.get("r0000").cycle_added == 3
    assert out.get("r0001").label == "pure"  # untouched
    assert out.get("r0001").cycle_added is None
    # relabel without a cycle keeps the original cycle_added
    again = out.with_labels({"r0000": "silkcut"})
    assert again.get("r0000").label == "silkcut"
    assert again.get("r0000").cycle_added == 3


def test_strip_labels_drops_labels_and_generated_records():
    ds = Dataset(
        [
            tiny_record(0, label="pure"),
            tiny_record(1, label="broken", source="generated"),
            tiny_record(2),
        ]
    )
    pool = strip_labels(ds)
    assert pool.ids() == {"r0000", "r0002"}
    assert all(r.label is None for r in pool)


def test_labeled_subset():
    ds = Dataset([tiny_record(0, label="pure"), tiny_record(1)])
    assert ds.labeled_subset().ids() == {"r0000"}


# ---------------------------------------------------------------- stats


def test_class_stats_known_four_class_mix():
    # counts 5670/3114/7267/1751 over 17802 images
    counts = {"broken": 5670, "discolored": 3114, "pure": 7267, "silkcut": 1751}
    ds = labeled_dataset(counts)
    stats = class_stats(ds)
    assert stats.counts == counts
    assert stats.total == 17802
    rounded = {c: round(f, 4) for c, f in stats.fractions.items()}
    assert rounded == {
        "broken": 0.3185,
        "discolored": 0.1749,
        "pure": 0.4082,
        "silkcut": 0.0984,
    }


def test_class_stats_fractions_sum_to_one():
    rng = random.Random(7)
    for _ in range(20):
        counts = {c: rng.randint(0, 30) for c in CANONICAL_CLASSES}
        if sum(counts.values()) == 0:
            counts["pure"] = 1
        stats = class_stats(labeled_dataset(counts))
        assert sum(stats.fractions.values()) == pytest.approx(1.0, abs=1e-12)


def test_class_stats_empty_and_unlabeled():
    empty = class_stats(Dataset())
    assert empty.total == 0
    assert all(f == 0.0 for f in empty.fractions.values())
    # unlabeled records never contribute counts
    ds = Dataset([tiny_record(0), tiny_record(1, label="pure")])
    assert class_stats(ds).counts["pure"] == 1
    assert class_stats(ds).total == 1


def test_class_stats_rejects_label_outside_classes():
    ds = Dataset([tiny_record(0, label="pure")])
    with pytest.raises(DatasetError, match="outside classes"):
        class_stats(ds, classes=("broken", "discolored"))


# ---------------------------------------------------------------- splits


def _split_counts(ds: Dataset) -> dict[str, int]:
    return class_stats(ds).counts


def test_stratified_split_worked_example():
    # 100 records, 32/17/40/11, train fraction 0.7
    ds = labeled_dataset({"broken": 32, "discolored": 17, "pure": 40, "silkcut": 11})
    train, val = stratified_split(ds, 0.7, seed=0)
    assert _split_counts(train) == {"broken": 22, "discolored": 12, "pure": 28, "silkcut": 8}
    assert _split_counts(val) == {"broken": 10, "discolored": 5, "pure": 12, "silkcut": 3}
    assert train.ids() | val.ids() == ds.ids()
    assert train.ids() & val.ids() == set()


def test_stratified_split_rounds_halves_up():
    # counts 1 and 3 at fraction 0.5: 0.5 -> 1 and 1.5 -> 2 (never banker's)
    ds = labeled_dataset({"broken": 1, "pure": 3})
    train, val = stratified_split(ds, 0.5, seed=1)
    assert _split_counts(train) == {"broken": 1, "discolored": 0, "pure": 2, "silkcut": 0}
    assert len(val) == 1


def test_stratified_split_seeded_and_deterministic():
    ds = labeled_dataset({"broken": 10, "pure": 10})
    a_train, a_val = stratified_split(ds, 0.7, seed=5)
    b_train, b_val = stratified_split(ds, 0.7, seed=5)
    assert a_train == b_train and a_val == b_val
    c_train, _ = stratified_split(ds, 0.7, seed=6)
    assert a_train != c_train  # different seed shuffles differently


def test_stratified_split_full_train_fraction():
    ds = labeled_dataset({"pure": 4})
    train, val = stratified_split(ds, 1.0, seed=0)
    assert len(train) == 4 and len(val) == 0
    with pytest.raises(DatasetError, match="train_fraction"):
        stratified_split(ds, 0.0, seed=0)


def test_stratified_split_rejects_unlabeled():
    ds = Dataset([tiny_record(0), tiny_record(1, label="pure")])
    with pytest.raises(DatasetError, match="unlabeled record"):
        stratified_split(ds, 0.5, seed=0)


def test_stratified_split_proportion_property():
    rng = random.Random(11)
    for trial in range(20):
        counts = {c: rng.randint(1, 40) for c in CANONICAL_CLASSES}
        frac = rng.choice([0.5, 0.6, 0.7, 0.8, 0.9])
        ds = labeled_dataset(counts)
        train, val = stratified_split(ds, frac, seed=trial)
        got = _split_counts(train)
        for c, n in counts.items():
            # per-class train share is within one record of the requested fraction
            assert abs(got[c] - frac * n) <= 0.5 + 1e-9
        assert train.ids() | val.ids() == ds.ids()
        assert train.ids().isdisjoint(val.ids())


# ---------------------------------------------------------------- balancing


def test_balancing_plan_worked_example():
    counts = {"broken": 3969, "discolored": 2180, "pure": 5087, "silkcut": 1226}
    stats = class_stats(labeled_dataset(counts))
    plan = balancing_plan(stats, target="max_class")
    assert plan == BalancingPlan(
        target_per_class=5087,
        to_generate={"broken": 1118, "discolored": 2907, "pure": 0, "silkcut": 3861},
    )
    # plan arithmetic: counts + to_generate hit the target for every class
    for c in counts:
        assert counts[c] + plan.to_generate[c] == plan.target_per_class
    assert sum(counts.values()) + sum(plan.to_generate.values()) == 4 * 5087 == 20348


def test_balancing_plan_uniform_is_noop():
    stats = class_stats(labeled_dataset({c: 7 for c in CANONICAL_CLASSES}))
    plan = balancing_plan(stats)
    assert all(v == 0 for v in plan.to_generate.values())


def test_balancing_plan_explicit_target():
    stats = class_stats(labeled_dataset({"broken": 2, "pure": 5}))
    plan = balancing_plan(stats, target=6)
    assert plan.to_generate == {"broken": 4, "discolored": 6, "pure": 1, "silkcut": 6}
    with pytest.raises(DatasetError, match="below the largest class"):
        balancing_plan(stats, target=4)
    with pytest.raises(DatasetError, match="unknown balancing target"):
        balancing_plan(stats, target="median")
    with pytest.raises(DatasetError, match="non-empty class"):
        balancing_plan(class_stats(Dataset()))


# ---------------------------------------------------------------- purity map


def test_physical_purity_map():
    assert physical_purity_map("pure") == "pure"
    for c in ("broken", "discolored", "silkcut"):
        assert physical_purity_map(c) == "impure"


def test_purity_agreement_never_below_class_agreement():
    rng = random.Random(3)
    classes = CANONICAL_CLASSES
    for _ in range(50):
        n = rng.randint(1, 60)
        truth = [rng.choice(classes) for _ in range(n)]
        pred = [rng.choice(classes) for _ in range(n)]
        class_acc = sum(t == p for t, p in zip(truth, pred)) / n
        purity_acc = sum(
            physical_purity_map(t) == physical_purity_map(p) for t, p in zip(truth, pred)
        ) / n
        assert purity_acc >= class_acc - 1e-12
        impure_confusions = sum(
            t != p and physical_purity_map(t) == physical_purity_map(p) == "impure"
            for t, p in zip(truth, pred)
        )
        if impure_confusions == 0:
            assert purity_acc == pytest.approx(class_acc, abs=1e-12)
        else:
            assert purity_acc > class_acc


# ---------------------------------------------------------------- manifests


def _sample_dataset() -> Dataset:
    return Dataset(
        [
            tiny_record(0, label="pure", pair_id="p0"),
            tiny_record(1, label="broken", view="bottom", pair_id="p0"),
            tiny_record(2),
        ]
    )


def test_manifest_round_trip_with_images(tmp_path: Path):
    ds = _sample_dataset()
    man = tmp_path / "data.jsonl"
    save_manifest(ds, man, image_dir=tmp_path / "images")
    loaded = load_manifest(man)
    assert loaded.ids() == ds.ids()
    for rec in ds:
        back = loaded.get(rec.id)
        assert (back.view, back.source, back.label, back.pair_id, back.cycle_added) == (
            rec.view,
            rec.source,
            rec.label,
            rec.pair_id,
            rec.cycle_added,
        )
        np.testing.assert_array_equal(load_pixels(back), rec.pixels)


def test_manifest_resave_is_byte_identical(tmp_path: Path):
    ds = _sample_dataset()
    first = tmp_path / "a.jsonl"
    save_manifest(ds, first, image_dir=tmp_path / "images")
    second = tmp_path / "b.jsonl"
    save_manifest(load_manifest(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_manifest_relative_paths_resolve_against_manifest_dir(tmp_path: Path):
    ds = Dataset([tiny_record(0, label="pure")])
    sub = tmp_path / "run"
    save_manifest(ds, sub / "m.jsonl", image_dir=sub / "images")
    line = json.loads((sub / "m.jsonl").read_text().splitlines()[0])
    assert line["path"] == "images/r0000.png"  # stored relative
    loaded = load_manifest(sub / "m.jsonl")
    assert Path(loaded.get("r0000").path).is_absolute()
    np.testing.assert_array_equal(load_pixels(loaded.get("r0000")), ds.get("r0000").pixels)


def test_manifest_malformed_line_names_line_number(tmp_path: Path):
    man = tmp_path / "bad.jsonl"
    good = '{"id":"a","view":"top","source":"captured","label":null,"path":null,"pair_id":null,"cycle_added":null}'
    man.write_text(good + "\n" + good.replace('"a"', '"b"') + "\n{oops\n")
    with pytest.raises(DatasetError, match="line 3"):
        load_manifest(man)


def test_manifest_duplicate_id_is_named(tmp_path: Path):
    man = tmp_path / "dup.jsonl"
    line = '{"id":"seed-7","view":"top","source":"captured"}'
    man.write_text(line + "\n" + line + "\n")
    with pytest.raises(DatasetError, match="seed-7"):
        load_manifest(man)


def test_manifest_field_errors_carry_line_numbers(tmp_path: Path):
    man = tmp_path / "m.jsonl"
    man.write_text('{"id":"a","view":"diagonal"}\n')
    with pytest.raises(DatasetError, match="line 1"):
        load_manifest(man)
    man.write_text('{"id":"a","wat":1}\n')
    with pytest.raises(DatasetError, match="unknown keys"):
        load_manifest(man)
    man.write_text('{"view":"top"}\n')
    with pytest.raises(DatasetError, match="missing or invalid id"):
        load_manifest(man)


def test_manifest_blank_lines_and_empty_file(tmp_path: Path):
    man = tmp_path / "m.jsonl"
    man.write_text("\n\n")
    assert len(load_manifest(man)) == 0


def test_load_pixels_requires_path_or_pixels(tmp_path: Path):
    rec = ImageRecord(id="x")
    with pytest.raises(DatasetError, match="neither pixels nor a path"):
        load_pixels(rec)
    rec = ImageRecord(id="x", path=str(tmp_path / "missing.png"))
    with pytest.raises(DatasetError, match="cannot read image"):
        load_pixels(rec)


# ---------------------------------------------------------------- pairs


def test_pair_integrity_ok_and_violations():
    ok = Dataset(
        [
            tiny_record(0, view="top", pair_id="p1"),
            tiny_record(1, view="bottom", pair_id="p1"),
            tiny_record(2),  # unpaired is fine
        ]
    )
    check_pair_integrity(ok)

    trio = Dataset(
        [
            tiny_record(0, view="top", pair_id="p1"),
            tiny_record(1, view="bottom", pair_id="p1"),
            tiny_record(2, view="top", pair_id="p1"),
        ]
    )
    with pytest.raises(DatasetError, match="3 records"):
        check_pair_integrity(trio)

    same_view = Dataset(
        [
            tiny_record(0, view="top", pair_id="p2"),
            tiny_record(1, view="top", pair_id="p2"),
        ]
    )
    with pytest.raises(DatasetError, match="opposite views"):
        check_pair_integrity(same_view)
