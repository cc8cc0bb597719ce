"""Synthetic seed imagery for demos, tests and no-hardware runs.

Three generators:

* solid-color class images — the easiest possible 4-class problem, used for
  fast classifier / GAN smoke checks;
* seed-like shapes — rotated ellipse bodies on a bright background with a
  per-class defect signature (chipped body, dark blotch, clean body, thin
  dark streak) plus class-correlated noise, difficult enough that accuracy
  must be earned by training;
* tray photos — many seeds laid out on a bright tray, with an optional
  mirrored bottom view, for the segmentation and view-pairing pipeline.
"""

from __future__ import annotations

import numpy as np

from .dataset import CANONICAL_CLASSES, Dataset, ImageRecord

_SOLID_BASE = {
    "broken": (200, 70, 70),
    "discolored": (70, 200, 70),
    "pure": (70, 70, 200),
    "silkcut": (200, 200, 70),
}


def _finish(img: np.ndarray, rng: np.random.Generator, sigma: float) -> np.ndarray:
    noisy = img + rng.normal(0.0, sigma, img.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def make_solid_image(label: str, rng: np.random.Generator, size: int = 32) -> np.ndarray:
    """Solid class color with brightness jitter and mild noise."""
    base = np.array(_SOLID_BASE[label], dtype=np.float64)
    base = base + rng.uniform(-25, 25)
    img = np.ones((size, size, 3), dtype=np.float64) * base
    return _finish(img, rng, sigma=6.0)


def paint_seed(
    img: np.ndarray,
    label: str,
    rng: np.random.Generator,
    center: tuple[float, float],
    radius: float,
) -> None:
    """Draw one seed with its class signature onto a float image in place."""
    h, w = img.shape[:2]
    cy, cx = center
    ry = radius * rng.uniform(0.62, 0.78)
    rx = radius * rng.uniform(0.92, 1.0)
    theta = rng.uniform(0.0, np.pi)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xr = (xx - cx) * cos_t + (yy - cy) * sin_t
    yr = -(xx - cx) * sin_t + (yy - cy) * cos_t
    body = (xr / rx) ** 2 + (yr / ry) ** 2 <= 1.0

    if label == "broken":
        # Chip off a side: remove everything past a chord through the body.
        phi = rng.uniform(0.0, 2 * np.pi)
        offset = rng.uniform(0.05, 0.35) * rx
        cut = (np.cos(phi) * xr + np.sin(phi) * yr) > offset
        body &= ~cut

    color = np.array([208.0, 175.0, 92.0]) + rng.uniform(-18, 18, 3)
    shade = 1.0 - 0.25 * np.clip((xr / rx) ** 2 + (yr / ry) ** 2, 0, 1)
    for c in range(3):
        img[..., c][body] = color[c] * shade[body]

    if label == "discolored":
        bx = rng.uniform(-0.45, 0.45) * rx
        by = rng.uniform(-0.45, 0.45) * ry
        br = rng.uniform(0.22, 0.34) * radius
        blotch = body & ((xr - bx) ** 2 + (yr - by) ** 2 <= br**2)
        blotch_color = np.array([110.0, 78.0, 52.0]) + rng.uniform(-10, 10, 3)
        for c in range(3):
            img[..., c][blotch] = blotch_color[c]
    elif label == "silkcut":
        alpha = rng.uniform(0.0, np.pi)
        off = rng.uniform(-0.3, 0.3) * ry
        width = rng.uniform(0.05, 0.08) * radius + 0.6
        streak = body & (np.abs(np.sin(alpha) * xr - np.cos(alpha) * yr - off) < width)
        streak_color = np.array([70.0, 58.0, 44.0]) + rng.uniform(-8, 8, 3)
        for c in range(3):
            img[..., c][streak] = streak_color[c]


_CLASS_SIGMA = {"broken": 7.0, "discolored": 6.0, "pure": 4.0, "silkcut": 5.0}


def make_shape_image(label: str, rng: np.random.Generator, size: int = 32) -> np.ndarray:
    """One seed-like crop for the given class."""
    img = np.full((size, size, 3), 246.0) + rng.normal(0, 2.0, (size, size, 3))
    center = (
        size / 2 + rng.uniform(-0.06, 0.06) * size,
        size / 2 + rng.uniform(-0.06, 0.06) * size,
    )
    paint_seed(img, label, rng, center, radius=0.36 * size)
    return _finish(img, rng, sigma=_CLASS_SIGMA[label])


def _class_sequence(
    n: int, rng: np.random.Generator, fractions: dict[str, float] | None
) -> list[str]:
    classes = list(CANONICAL_CLASSES)
    if fractions is None:
        fractions = {c: 1.0 / len(classes) for c in classes}
    counts = {c: int(np.floor(fractions.get(c, 0.0) * n)) for c in classes}
    short = n - sum(counts.values())
    by_frac = sorted(classes, key=lambda c: -fractions.get(c, 0.0))
    for i in range(short):
        counts[by_frac[i % len(by_frac)]] += 1
    seq = [c for c in classes for _ in range(counts[c])]
    rng.shuffle(seq)
    return seq


def make_dataset(
    n: int,
    seed: int,
    kind: str = "shapes",
    size: int = 32,
    class_fractions: dict[str, float] | None = None,
    id_prefix: str = "syn",
    name: str = "synthetic",
) -> Dataset:
    """n labeled in-memory records of the requested kind ("shapes"|"solid")."""
    if kind not in ("shapes", "solid"):
        raise ValueError(f"unknown synthetic kind {kind!r}")
    rng = np.random.default_rng(seed)
    make = make_shape_image if kind == "shapes" else make_solid_image
    labels = _class_sequence(n, rng, class_fractions)
    records = [
        ImageRecord(
            id=f"{id_prefix}-{i:05d}",
            view="top",
            source="captured",
            label=labels[i],
            pixels=make(labels[i], rng, size=size),
        )
        for i in range(n)
    ]
    return Dataset(records, name=name)


def make_paired_dataset(
    n_pairs: int,
    seed: int,
    size: int = 32,
    id_prefix: str = "pair",
    name: str = "synthetic-paired",
) -> Dataset:
    """Top/bottom record pairs: same seed class, independently rendered views."""
    rng = np.random.default_rng(seed)
    labels = _class_sequence(n_pairs, rng, None)
    records = []
    for i in range(n_pairs):
        pid = f"{id_prefix}-p{i:05d}"
        for view in ("top", "bottom"):
            records.append(
                ImageRecord(
                    id=f"{id_prefix}-{i:05d}-{view[0]}",
                    view=view,
                    source="captured",
                    label=labels[i],
                    pixels=make_shape_image(labels[i], rng, size=size),
                    pair_id=pid,
                )
            )
    return Dataset(records, name=name)


def make_tray_image(
    rows: int,
    cols: int,
    seed: int,
    cell: int = 80,
    mirrored_bottom: bool = False,
) -> tuple[np.ndarray, np.ndarray | None, list[str]]:
    """Tray photo with rows*cols seeds on a jittered grid.

    Returns (top_image, bottom_image_or_None, labels in reading order).  The
    bottom view mirrors seed positions horizontally, the way a flipped tray
    would appear.
    """
    rng = np.random.default_rng(seed)
    h, w = rows * cell, cols * cell
    top = np.full((h, w, 3), 247.0) + rng.normal(0, 1.5, (h, w, 3))
    bottom = np.full((h, w, 3), 247.0) + rng.normal(0, 1.5, (h, w, 3)) if mirrored_bottom else None
    labels: list[str] = []
    for r in range(rows):
        for c in range(cols):
            label = CANONICAL_CLASSES[rng.integers(len(CANONICAL_CLASSES))]
            labels.append(label)
            cy = r * cell + cell / 2 + rng.uniform(-0.08, 0.08) * cell
            cx = c * cell + cell / 2 + rng.uniform(-0.08, 0.08) * cell
            radius = 0.3 * cell * rng.uniform(0.9, 1.05)
            paint_seed(top, label, rng, (cy, cx), radius)
            if bottom is not None:
                paint_seed(bottom, label, rng, (cy, w - 1 - cx), radius)
    top_u8 = np.clip(np.rint(top + rng.normal(0, 2.0, top.shape)), 0, 255).astype(np.uint8)
    bottom_u8 = None
    if bottom is not None:
        bottom_u8 = np.clip(np.rint(bottom + rng.normal(0, 2.0, bottom.shape)), 0, 255).astype(
            np.uint8
        )
    return top_u8, bottom_u8, labels
