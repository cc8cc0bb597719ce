"""Dataset model: image records, manifests, class stats, splits and balancing plans.

The default label set is the 4-class corn-seed scheme. The canonical class
order (alphabetic) fixes the indexing of probability vectors and confusion
matrices everywhere else in the package.
"""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from PIL import Image

CANONICAL_CLASSES: tuple[str, ...] = ("broken", "discolored", "pure", "silkcut")
VIEWS = ("top", "bottom")
SOURCES = ("captured", "generated")

PURE = "pure"
IMPURE = "impure"

# Manifest key order is fixed so that re-serialization is byte-stable.
_MANIFEST_KEYS = ("id", "view", "source", "label", "path", "pair_id", "cycle_added")


class DatasetError(ValueError):
    """Raised on malformed records, manifests or inconsistent plans."""


@dataclass(frozen=True)
class ImageRecord:
    """One seed crop, either captured by the rig or generated.

    ``pixels`` holds an in-memory HxWx3 uint8 RGB array and is excluded
    from equality; persisted records reference their image through ``path``.
    """

    id: str
    view: str = "top"
    source: str = "captured"
    label: str | None = None
    path: str | None = None
    pixels: np.ndarray | None = field(default=None, compare=False, repr=False)
    pair_id: str | None = None
    cycle_added: int | None = None

    def __post_init__(self) -> None:
        if self.view not in VIEWS:
            raise DatasetError(f"record {self.id!r}: view must be one of {VIEWS}, got {self.view!r}")
        if self.source not in SOURCES:
            raise DatasetError(f"record {self.id!r}: source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "generated" and self.label is None:
            raise DatasetError(f"record {self.id!r}: generated records must carry their conditioning label")
        if self.cycle_added is not None and self.cycle_added < 0:
            raise DatasetError(f"record {self.id!r}: cycle_added must be non-negative")


def load_pixels(record: ImageRecord) -> np.ndarray:
    """Return the record's 8-bit RGB pixels, reading from disk if needed."""
    if record.pixels is not None:
        return record.pixels
    if record.path is None:
        raise DatasetError(f"record {record.id!r} has neither pixels nor a path")
    try:
        with Image.open(record.path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read image for record {record.id!r}: {exc}") from exc


class Dataset:
    """Immutable, id-sorted collection of :class:`ImageRecord`.

    Sorting by id makes iteration order deterministic, so every seeded
    downstream sampling step is reproducible.
    """

    def __init__(self, records: Iterable[ImageRecord] = (), name: str = ""):
        ordered = sorted(records, key=lambda r: r.id)
        seen: set[str] = set()
        for rec in ordered:
            if rec.id in seen:
                raise DatasetError(f"duplicate id {rec.id!r} in dataset")
            seen.add(rec.id)
        self._records: tuple[ImageRecord, ...] = tuple(ordered)
        self._by_id = {r.id: r for r in ordered}
        self.name = name

    @property
    def records(self) -> tuple[ImageRecord, ...]:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self._records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self._records == other._records

    def __repr__(self) -> str:
        return f"Dataset(name={self.name!r}, n={len(self)})"

    def ids(self) -> set[str]:
        return set(self._by_id)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._by_id

    def get(self, record_id: str) -> ImageRecord:
        try:
            return self._by_id[record_id]
        except KeyError:
            raise DatasetError(f"no record with id {record_id!r}") from None

    def labeled_subset(self) -> "Dataset":
        return Dataset([r for r in self if r.label is not None], name=self.name)

    def subset(self, ids: Iterable[str]) -> "Dataset":
        """Records with the given ids; raises on ids not present."""
        return Dataset([self.get(i) for i in ids], name=self.name)

    def union(self, other: Iterable[ImageRecord]) -> "Dataset":
        return Dataset(list(self._records) + list(other), name=self.name)

    def without_ids(self, ids: Iterable[str]) -> "Dataset":
        drop = set(ids)
        return Dataset([r for r in self if r.id not in drop], name=self.name)

    def with_labels(self, labels: Mapping[str, str], cycle_added: int | None = None) -> "Dataset":
        """New dataset where the given records are relabeled (others untouched)."""
        out = []
        for rec in self:
            if rec.id in labels:
                fields = {"label": labels[rec.id]}
                if cycle_added is not None:
                    fields["cycle_added"] = cycle_added
                out.append(replace(rec, **fields))
            else:
                out.append(rec)
        return Dataset(out, name=self.name)


def strip_labels(dataset: Dataset, name: str | None = None) -> Dataset:
    """Copy of the dataset with all labels removed (an unlabeled pool)."""
    recs = [replace(r, label=None) for r in dataset if r.source == "captured"]
    return Dataset(recs, name=dataset.name if name is None else name)


@dataclass(frozen=True)
class ClassStats:
    counts: dict[str, int]
    fractions: dict[str, float]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def class_stats(dataset: Dataset, labeled_only: bool = False,
                classes: Sequence[str] = CANONICAL_CLASSES) -> ClassStats:
    """Per-class counts and fractions.

    Records without a label never contribute a count; ``labeled_only``
    documents intent at call sites working on partially labeled pools.
    Fractions are count/total and all zero for an empty total.
    """
    counts = {c: 0 for c in classes}
    for rec in dataset:
        if rec.label is None:
            continue
        if rec.label not in counts:
            raise DatasetError(f"record {rec.id!r} has label {rec.label!r} outside classes {tuple(classes)}")
        counts[rec.label] += 1
    total = sum(counts.values())
    if total == 0:
        fractions = {c: 0.0 for c in classes}
    else:
        fractions = {c: counts[c] / total for c in classes}
    return ClassStats(counts=counts, fractions=fractions)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded per-class split preserving class proportions.

    Each class contributes round-half-up(train_fraction * count) records to
    the train side, chosen by a seeded shuffle of that class's ids; the rest
    go to validation. The outputs partition the input.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise DatasetError(f"train_fraction must lie in (0, 1], got {train_fraction}")
    by_class: dict[str, list[str]] = defaultdict(list)
    for rec in dataset:
        if rec.label is None:
            raise DatasetError(f"unlabeled record in stratified split: {rec.id!r}")
        by_class[rec.label].append(rec.id)

    rng = random.Random(seed)
    train_ids: set[str] = set()
    for cls in sorted(by_class):
        ids = sorted(by_class[cls])
        rng.shuffle(ids)
        n_train = _round_half_up(train_fraction * len(ids))
        train_ids.update(ids[:n_train])

    train = Dataset([r for r in dataset if r.id in train_ids], name=f"{dataset.name}/train")
    val = Dataset([r for r in dataset if r.id not in train_ids], name=f"{dataset.name}/val")
    return train, val


@dataclass(frozen=True)
class BalancingPlan:
    """How many images to generate per class to reach a common target count."""

    target_per_class: int
    to_generate: dict[str, int]


def balancing_plan(stats: ClassStats, target: int | str = "max_class") -> BalancingPlan:
    """Plan generation counts so every class reaches the target.

    ``target`` is either the literal ``"max_class"`` (equalize at the largest
    class) or an explicit integer that must be at least the largest count.
    """
    counts = stats.counts
    if all(n == 0 for n in counts.values()):
        raise DatasetError("balancing plan needs at least one non-empty class")
    max_count = max(counts.values())
    if target == "max_class":
        goal = max_count
    elif isinstance(target, int):
        if target < max_count:
            raise DatasetError(f"explicit target {target} is below the largest class count {max_count}")
        goal = target
    else:
        raise DatasetError(f"unknown balancing target {target!r}")
    return BalancingPlan(target_per_class=goal,
                         to_generate={c: goal - n for c, n in counts.items()})


def physical_purity_map(label: str, pure_class: str = PURE) -> str:
    """Collapse a class label to the binary pure/impure scheme."""
    return PURE if label == pure_class else IMPURE


def _record_to_obj(rec: ImageRecord) -> dict:
    return {
        "id": rec.id,
        "view": rec.view,
        "source": rec.source,
        "label": rec.label,
        "path": rec.path,
        "pair_id": rec.pair_id,
        "cycle_added": rec.cycle_added,
    }


def _record_from_obj(obj: dict, lineno: int) -> ImageRecord:
    unknown = set(obj) - set(_MANIFEST_KEYS)
    if unknown:
        raise DatasetError(f"manifest line {lineno}: unknown keys {sorted(unknown)}")
    if "id" not in obj or not isinstance(obj["id"], str) or not obj["id"]:
        raise DatasetError(f"manifest line {lineno}: missing or invalid id")
    try:
        return ImageRecord(
            id=obj["id"],
            view=obj.get("view", "top"),
            source=obj.get("source", "captured"),
            label=obj.get("label"),
            path=obj.get("path"),
            pair_id=obj.get("pair_id"),
            cycle_added=obj.get("cycle_added"),
        )
    except DatasetError as exc:
        raise DatasetError(f"manifest line {lineno}: {exc}") from None


def record_to_json(rec: ImageRecord) -> str:
    return json.dumps(_record_to_obj(rec), separators=(",", ":"))


def load_manifest(path: str | Path, name: str | None = None) -> Dataset:
    """Read a JSONL manifest into a Dataset.

    Errors carry the offending line number (malformed JSON) or id (duplicates).
    """
    path = Path(path)
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"manifest line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DatasetError(f"manifest line {lineno}: expected a JSON object")
            rec = _record_from_obj(obj, lineno)
            if rec.path is not None and not Path(rec.path).is_absolute():
                # Relative image paths are anchored at the manifest location
                # so run directories stay relocatable.
                rec = replace(rec, path=str(path.parent / rec.path))
            if rec.id in seen:
                raise DatasetError(f"duplicate id {rec.id!r} in manifest {path}")
            seen.add(rec.id)
            records.append(rec)
    return Dataset(records, name=path.stem if name is None else name)


def save_manifest(dataset: Dataset, path: str | Path,
                  image_dir: str | Path | None = None) -> None:
    """Write a JSONL manifest; optionally materialize in-memory pixels as PNGs.

    With ``image_dir`` set, records that only have in-memory pixels get a PNG
    written under it and their manifest line points at that file.
    """
    path = Path(path)
    if image_dir is not None:
        image_dir = Path(image_dir)
        image_dir.mkdir(parents=True, exist_ok=True)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in dataset:
            if rec.path is None and rec.pixels is not None and image_dir is not None:
                img_path = image_dir / f"{rec.id}.png"
                Image.fromarray(rec.pixels).save(img_path)
                rec = replace(rec, path=str(img_path))
            if rec.path is not None:
                # Image refs under the manifest directory are written relative
                # to it, mirroring how load_manifest resolves them; this keeps
                # load -> save byte-stable and run directories relocatable.
                try:
                    ref = str(Path(rec.path).resolve().relative_to(path.parent.resolve()))
                except ValueError:
                    ref = str(rec.path)
                rec = replace(rec, path=ref)
            fh.write(record_to_json(rec) + "\n")


def check_pair_integrity(dataset: Dataset) -> None:
    """Verify that every pair_id links exactly one top and one bottom record."""
    groups: dict[str, list[ImageRecord]] = defaultdict(list)
    for rec in dataset:
        if rec.pair_id is not None:
            groups[rec.pair_id].append(rec)
    for pid, members in groups.items():
        if len(members) != 2:
            raise DatasetError(f"pair_id {pid!r} links {len(members)} records, expected 2")
        views = {m.view for m in members}
        if views != {"top", "bottom"}:
            raise DatasetError(f"pair_id {pid!r} does not link opposite views")
