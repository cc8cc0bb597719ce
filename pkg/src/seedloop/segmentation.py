"""Watershed extraction of individual seed crops from tray photographs.

Trays are photographed against a near-white background, so seeds are the
dark foreground. Markers come from local maxima of the distance transform,
which separates touching convex objects; the watershed then assigns every
foreground pixel to exactly one region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage as ndi
from skimage.filters import threshold_otsu
from skimage.segmentation import watershed


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class TrayImage:
    pixels: np.ndarray  # HxWx3 uint8 RGB
    view: str = "top"

    def __post_init__(self) -> None:
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3:
            raise SegmentationError(f"tray image must be HxWx3, got shape {px.shape}")
        if px.shape[0] < 64 or px.shape[1] < 64:
            raise SegmentationError(f"tray image must be at least 64x64, got {px.shape[:2]}")


@dataclass(frozen=True)
class SeedCrop:
    pixels: np.ndarray = field(compare=False, repr=False)
    bbox: tuple[int, int, int, int]  # (x, y, w, h) in source coordinates
    centroid: tuple[float, float]    # (cx, cy)
    area: int

    def __post_init__(self) -> None:
        x, y, w, h = self.bbox
        if self.area > w * h:
            raise SegmentationError(f"crop area {self.area} exceeds bbox {w}x{h}")


@dataclass(frozen=True)
class SegmentationConfig:
    threshold_method: str | float = "otsu"  # "otsu" or a fixed grayscale level in [0, 255]
    min_area_px: int = 100
    crop_padding_px: int = 8
    distance_peak_min_separation_px: int = 15

    def __post_init__(self) -> None:
        if self.min_area_px < 1:
            raise SegmentationError("min_area_px must be >= 1")
        if self.crop_padding_px < 0:
            raise SegmentationError("crop_padding_px must be >= 0")
        if self.distance_peak_min_separation_px < 1:
            raise SegmentationError("distance_peak_min_separation_px must be >= 1")


def _grayscale(pixels: np.ndarray) -> np.ndarray:
    px = pixels.astype(np.float64)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def _foreground_mask(gray: np.ndarray, config: SegmentationConfig) -> np.ndarray:
    # Seeds are darker than the white film background.
    if config.threshold_method == "otsu":
        if gray.min() == gray.max():
            return np.zeros(gray.shape, dtype=bool)
        t = threshold_otsu(gray)
    else:
        t = float(config.threshold_method)
    return gray < t


def _remove_small(mask: np.ndarray, min_area: int) -> np.ndarray:
    labels, n = ndi.label(mask)
    if n == 0:
        return mask
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_area
    keep[0] = False
    return keep[labels]


def _find_markers(distance: np.ndarray, mask: np.ndarray, min_sep: int) -> np.ndarray:
    """Marker label image from distance-transform maxima with min separation.

    Plateaus collapse to their centroid; remaining peaks are greedily kept in
    decreasing height order (ties by position), suppressing any peak within
    ``min_sep`` of an already-kept one. Deterministic for a fixed input.
    """
    size = 2 * min_sep + 1
    is_max = (distance == ndi.maximum_filter(distance, size=size)) & mask & (distance > 0)
    plateau_labels, n_plateaus = ndi.label(is_max)
    markers = np.zeros(distance.shape, dtype=np.int32)
    if n_plateaus == 0:
        return markers

    centroids = ndi.center_of_mass(is_max, plateau_labels, range(1, n_plateaus + 1))
    peaks = []
    for cy, cx in centroids:
        py, px = int(round(cy)), int(round(cx))
        # The centroid of a concave plateau may fall off it; snap to the
        # nearest plateau pixel in that case.
        if not is_max[py, px]:
            ys, xs = np.nonzero(is_max)
            j = np.argmin((ys - cy) ** 2 + (xs - cx) ** 2)
            py, px = int(ys[j]), int(xs[j])
        peaks.append((distance[py, px], py, px))
    peaks.sort(key=lambda p: (-p[0], p[1], p[2]))

    kept: list[tuple[int, int]] = []
    for _, py, px in peaks:
        if all((py - ky) ** 2 + (px - kx) ** 2 >= min_sep ** 2 for ky, kx in kept):
            kept.append((py, px))
    for i, (py, px) in enumerate(kept, start=1):
        markers[py, px] = i
    return markers


def watershed_label_map(image: TrayImage, config: SegmentationConfig = SegmentationConfig()
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Intermediate (labels, foreground) pair, exposed for partition checks.

    The returned label image assigns every foreground pixel to exactly one
    positive region id; background stays 0.
    """
    gray = _grayscale(image.pixels)
    mask = _foreground_mask(gray, config)
    mask = _remove_small(mask, config.min_area_px)
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.int32), mask
    distance = ndi.distance_transform_edt(mask)
    markers = _find_markers(distance, mask, config.distance_peak_min_separation_px)
    if markers.max() == 0:
        # Degenerate flat distance map; fall back to connected components.
        labels, _ = ndi.label(mask)
        return labels.astype(np.int32), mask
    labels = watershed(-distance, markers, mask=mask)
    return labels.astype(np.int32), mask


def segment_tray(image: TrayImage, config: SegmentationConfig = SegmentationConfig()
                 ) -> list[SeedCrop]:
    """Extract one padded crop per watershed region, in reading order.

    A tray that is entirely background yields an empty list. Regions smaller
    than ``min_area_px`` after the watershed are dropped (split residue).
    """
    labels, _ = watershed_label_map(image, config)
    n_regions = int(labels.max())
    if n_regions == 0:
        return []

    h, w = labels.shape
    pad = config.crop_padding_px
    crops: list[SeedCrop] = []
    slices = ndi.find_objects(labels)
    for region_id, sl in enumerate(slices, start=1):
        if sl is None:
            continue
        region = labels[sl] == region_id
        area = int(region.sum())
        if area < config.min_area_px:
            continue
        ys, xs = sl
        y0 = max(0, ys.start - pad)
        y1 = min(h, ys.stop + pad)
        x0 = max(0, xs.start - pad)
        x1 = min(w, xs.stop + pad)
        cy, cx = ndi.center_of_mass(region)
        crops.append(SeedCrop(
            pixels=image.pixels[y0:y1, x0:x1].copy(),
            bbox=(x0, y0, x1 - x0, y1 - y0),
            centroid=(float(cx + xs.start), float(cy + ys.start)),
            area=area,
        ))
    crops.sort(key=lambda c: (c.centroid[1], c.centroid[0]))
    return crops


def pair_views(top_crops: Sequence[SeedCrop], bottom_crops: Sequence[SeedCrop],
               image_width: int) -> list[tuple[SeedCrop, SeedCrop]]:
    """Match top crops to bottom crops of the same physical seed.

    The bottom camera faces the tray from below, so bottom centroids are
    mirrored horizontally before greedy minimum-distance matching. A length
    mismatch signals a segmentation failure on one view and is an error.
    """
    if len(top_crops) != len(bottom_crops):
        raise SegmentationError(
            f"view crop counts differ: {len(top_crops)} top vs {len(bottom_crops)} bottom")
    n = len(top_crops)
    if n == 0:
        return []

    top_pts = np.array([c.centroid for c in top_crops], dtype=np.float64)
    bot_pts = np.array([(image_width - c.centroid[0], c.centroid[1]) for c in bottom_crops],
                       dtype=np.float64)
    d2 = ((top_pts[:, None, :] - bot_pts[None, :, :]) ** 2).sum(axis=2)

    order = sorted(((d2[i, j], i, j) for i in range(n) for j in range(n)))
    used_top: set[int] = set()
    used_bot: set[int] = set()
    matches: list[tuple[int, int]] = []
    for _, i, j in order:
        if i in used_top or j in used_bot:
            continue
        used_top.add(i)
        used_bot.add(j)
        matches.append((i, j))
        if len(matches) == n:
            break
    matches.sort()
    return [(top_crops[i], bottom_crops[j]) for i, j in matches]
