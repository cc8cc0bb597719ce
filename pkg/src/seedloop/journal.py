"""Append-only JSONL journal of annotation events.

The journal is the source of truth for which pool images were labeled in
which cycle.  Replaying it against the initial labeled/unlabeled snapshots
reconstructs the partition at any cycle, including after a crash that left a
half-written trailing line.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .dataset import Dataset

_EVENT_KEYS = (
    "timestamp_ms",
    "image_id",
    "assigned_label",
    "suggested_label",
    "accepted_suggestion",
    "annotator_id",
    "cycle",
    "elapsed_ms",
)


class JournalError(ValueError):
    """Raised for malformed journal content (other than a truncated tail)."""


@dataclass(frozen=True)
class LabelEvent:
    """One label decision by an annotator (human or simulated)."""

    timestamp_ms: int
    image_id: str
    assigned_label: str
    suggested_label: str
    accepted_suggestion: bool
    annotator_id: str
    cycle: int
    elapsed_ms: int

    def __post_init__(self) -> None:
        if self.accepted_suggestion != (self.assigned_label == self.suggested_label):
            raise JournalError(
                f"event for {self.image_id!r}: accepted_suggestion="
                f"{self.accepted_suggestion} contradicts assigned="
                f"{self.assigned_label!r} vs suggested={self.suggested_label!r}"
            )
        if self.cycle < 0:
            raise JournalError(f"event for {self.image_id!r}: cycle must be >= 0")
        if self.elapsed_ms < 0:
            raise JournalError(f"event for {self.image_id!r}: elapsed_ms must be >= 0")


def make_event(
    timestamp_ms: int,
    image_id: str,
    assigned_label: str,
    suggested_label: str,
    annotator_id: str,
    cycle: int,
    elapsed_ms: int,
) -> LabelEvent:
    """Build an event deriving accepted_suggestion from the two labels."""
    return LabelEvent(
        timestamp_ms=timestamp_ms,
        image_id=image_id,
        assigned_label=assigned_label,
        suggested_label=suggested_label,
        accepted_suggestion=assigned_label == suggested_label,
        annotator_id=annotator_id,
        cycle=cycle,
        elapsed_ms=elapsed_ms,
    )


def event_to_json(event: LabelEvent) -> str:
    data = asdict(event)
    return json.dumps({k: data[k] for k in _EVENT_KEYS}, separators=(",", ":"))


def _event_from_obj(obj: object) -> LabelEvent:
    if not isinstance(obj, dict):
        raise JournalError(f"journal line is not an object: {obj!r}")
    missing = [k for k in _EVENT_KEYS if k not in obj]
    if missing:
        raise JournalError(f"journal line missing keys {missing}")
    return LabelEvent(**{k: obj[k] for k in _EVENT_KEYS})


def journal_append(path: str | Path, event: LabelEvent) -> None:
    """Append one event and flush; one JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(event_to_json(event) + "\n")
        fh.flush()


def journal_repair(path: str | Path) -> bool:
    """Remove a truncated trailing line left by a crash; True if one was cut.

    Without the repair, the next append would concatenate onto the partial
    line and turn a recoverable tail into mid-file corruption.
    """
    path = Path(path)
    if not path.exists():
        return False
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return False
    try:
        _event_from_obj(json.loads(lines[-1]))
        return False
    except (json.JSONDecodeError, JournalError, TypeError):
        path.write_text("".join(line + "\n" for line in lines[:-1]), encoding="utf-8")
        return True


def journal_replay(path: str | Path) -> tuple[list[LabelEvent], bool]:
    """All readable events plus a flag for a truncated trailing line.

    A trailing line that fails to parse is treated as a crash artifact and
    dropped (truncated=True).  Corruption anywhere else raises JournalError.
    """
    path = Path(path)
    if not path.exists():
        return [], False
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    events: list[LabelEvent] = []
    for i, line in enumerate(lines):
        try:
            events.append(_event_from_obj(json.loads(line)))
        except (json.JSONDecodeError, JournalError, TypeError) as exc:
            if i == len(lines) - 1:
                return events, True
            raise JournalError(f"corrupt journal line {i + 1}: {exc}") from exc
    return events, False


def replay_partition(
    initial_labeled: Dataset,
    initial_pool: Dataset,
    events: list[LabelEvent],
    through_cycle: int | None = None,
) -> tuple[Dataset, Dataset]:
    """Labeled/unlabeled partition after applying events (optionally only
    those with cycle <= through_cycle)."""
    labels: dict[str, str] = {}
    cycle_added: dict[str, int] = {}
    pool_ids = initial_pool.ids()
    for ev in events:
        if through_cycle is not None and ev.cycle > through_cycle:
            continue
        if ev.image_id not in pool_ids:
            raise JournalError(f"journal labels {ev.image_id!r} which is not in the pool")
        labels[ev.image_id] = ev.assigned_label
        cycle_added[ev.image_id] = ev.cycle
    if not labels:
        return initial_labeled, initial_pool
    moved_by_cycle: dict[int, dict[str, str]] = {}
    for image_id, label in labels.items():
        moved_by_cycle.setdefault(cycle_added[image_id], {})[image_id] = label
    labeled = initial_labeled
    for cyc in sorted(moved_by_cycle):
        subset = initial_pool.subset(moved_by_cycle[cyc].keys())
        labeled = labeled.union(subset.with_labels(moved_by_cycle[cyc], cycle_added=cyc))
    pool = initial_pool.without_ids(labels.keys())
    return labeled, pool
