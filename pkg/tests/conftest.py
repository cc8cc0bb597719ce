"""Shared fixtures: tiny datasets and controllable stub classifier backends."""

from __future__ import annotations

import numpy as np
import pytest

from seedloop.classifier.models import ClassifierModel, ModelSpec, register_backend
from seedloop.dataset import CANONICAL_CLASSES, Dataset, ImageRecord, strip_labels
from seedloop.oracle import oracle_from_dataset
from seedloop.synthetic import make_dataset


class TableModel(ClassifierModel):
    """Backend whose predictions/features are looked up from a planted table.

    Tests register a table under an init_seed and address it through
    ModelSpec(backend_id="table", init_seed=<key>).
    """

    TABLES: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]] = {}

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._state = 0

    def _table(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return self.TABLES[self.spec.init_seed]

    def predict_proba(self, records):
        return np.array([self._table()[r.id][0] for r in records], dtype=np.float64)

    def embed(self, records):
        return np.array([self._table()[r.id][1] for r in records], dtype=np.float64)

    def train_epoch(self, images, labels, config):
        return 0.0

    def weight_state(self):
        return self._state

    def load_weight_state(self, state):
        self._state = state


class ScriptedModel(ClassifierModel):
    """Backend with a scripted per-epoch validation accuracy.

    The script (keyed by init_seed) lists how many of the n id-sorted records
    are predicted correctly after each training epoch; weight snapshots are
    just the epoch index, so best-epoch restoration is directly observable.
    """

    SCRIPTS: dict[int, list[int]] = {}

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.epoch = -1

    def _correct_count(self) -> int:
        script = self.SCRIPTS[self.spec.init_seed]
        return script[min(max(self.epoch, 0), len(script) - 1)]

    def predict_proba(self, records):
        k = self._correct_count()
        out = np.zeros((len(records), self.spec.num_classes))
        for i, rec in enumerate(records):
            truth = CANONICAL_CLASSES.index(rec.label)
            cls = truth if i < k else (truth + 1) % self.spec.num_classes
            out[i, cls] = 1.0
        return out

    def embed(self, records):
        return np.zeros((len(records), 2))

    def train_epoch(self, images, labels, config):
        self.epoch += 1
        return 0.0

    def weight_state(self):
        return self.epoch

    def load_weight_state(self, state):
        self.epoch = state


register_backend("table", TableModel)
register_backend("scripted", ScriptedModel)


def solid_pixels(rgb: tuple[int, int, int], size: int = 8) -> np.ndarray:
    return np.full((size, size, 3), rgb, dtype=np.uint8)


def tiny_record(
    i: int,
    label: str | None = None,
    view: str = "top",
    source: str = "captured",
    pair_id: str | None = None,
    prefix: str = "r",
    size: int = 8,
) -> ImageRecord:
    rng = np.random.default_rng(i)
    return ImageRecord(
        id=f"{prefix}{i:04d}",
        view=view,
        source=source,
        label=label,
        pixels=rng.integers(0, 256, (size, size, 3), dtype=np.uint8).astype(np.uint8),
        pair_id=pair_id,
    )


def labeled_dataset(counts: dict[str, int], prefix: str = "r") -> Dataset:
    records = []
    i = 0
    for cls in CANONICAL_CLASSES:
        for _ in range(counts.get(cls, 0)):
            records.append(tiny_record(i, label=cls, prefix=prefix))
            i += 1
    return Dataset(records)


@pytest.fixture(scope="session")
def shapes_600() -> Dataset:
    return make_dataset(600, seed=101, kind="shapes")


@pytest.fixture(scope="session")
def solid_400() -> Dataset:
    return make_dataset(400, seed=202, kind="solid")


@pytest.fixture(scope="session")
def loop_inputs():
    """Small solid-color corpus split into labeled / pool / val + an oracle."""
    ds = make_dataset(64, seed=7, kind="solid", size=16)
    recs = list(ds)
    labeled = Dataset(recs[:16], name="labeled")
    val = Dataset(recs[16:32], name="val")
    pool_truth = Dataset(recs[32:], name="pool-truth")
    pool = strip_labels(pool_truth, name="pool")
    oracle = oracle_from_dataset(pool_truth, base_ms=700, disagree_extra_ms=300)
    return labeled, pool, val, oracle


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            if "test_acceptance" not in rep.nodeid:
                continue
            word = "PASS" if outcome == "passed" else "FAIL"
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            name = rep.nodeid.split("::")[-1]
            rows.append((name, f"{word}  {name}" + (f"  [{detail}]" if detail else "")))
    if rows:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(rows):
            terminalreporter.write_line(line)
