"""Heuristic text-region detection and the legibility smoke test.

This is deliberately not an OCR engine: it finds things that look like
lines of text (small high-contrast components that cluster horizontally)
so the report can flag likely legibility problems even with no external
OCR plugin configured. When such a plugin is configured its results take
precedence and are merged in through ``merge_ocr_results``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import GrayImage

# Detection gates. None of these are principled constants; they were tuned
# on synthetic charts and are exposed so callers can re-tune.
ADAPTIVE_WINDOW = 15
ADAPTIVE_OFFSET = 10
MIN_COMPONENT_AREA = 8
MAX_COMPONENT_AREA = 5000
MIN_ASPECT = 0.05
MAX_ASPECT = 15.0
MIN_FILL_RATIO = 0.1
MAX_FILL_RATIO = 0.95
# Adaptive thresholding presupposes sparse foreground; text covers a few
# percent of a chart. A polarity mask firing on a third of the image is
# noise, and its components are not text candidates.
MAX_MASK_DENSITY = 0.30
DEFAULT_MIN_TEXT_HEIGHT = 10


@dataclass(frozen=True)
class TextRegion:
    """One detected text candidate (a merged line box)."""

    x: int
    y: int
    w: int
    h: int
    est_height: int
    confidence: float
    text: str | None = None

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class LegibilityWarning:
    region: TextRegion
    reason: str  # "too_small" | "low_contrast"
    threshold: float


def _local_mean(values: np.ndarray, size: int) -> np.ndarray:
    return ndimage.uniform_filter(values.astype(np.float64), size=size, mode="nearest")


def _component_boxes(mask: np.ndarray) -> list[tuple[int, int, int, int, int, np.ndarray]]:
    """Connected components of a binary mask as (x, y, w, h, area, submask)."""
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    boxes = []
    for index, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        sub = labels[sl] == index
        y, x = sl[0].start, sl[1].start
        h, w = sub.shape
        boxes.append((x, y, w, h, int(sub.sum()), sub))
    return boxes


def _stroke_confidence(sub: np.ndarray) -> float:
    """Stroke-width consistency score in [0, 1].

    Text strokes have near-constant width; a component whose distance
    transform varies wildly is probably a blob or a frame fragment.
    """
    dist = ndimage.distance_transform_edt(sub)
    widths = dist[sub]
    if widths.size == 0:
        return 0.0
    mean = float(widths.mean())
    if mean == 0:
        return 0.0
    spread = float(widths.std()) / mean
    return float(np.clip(1.0 - 0.5 * spread, 0.0, 1.0))


def detect_text_regions(gray: GrayImage) -> list[TextRegion]:
    """Find text-like regions with no external OCR engine.

    Binarizes against the 15x15 local mean minus an offset (both
    polarities, so dark-on-light and light-on-dark text are found), keeps
    connected components that pass the size/aspect/fill gates, and merges
    horizontally adjacent components into line boxes (gap up to the taller
    component's height). Deterministic; the ``text`` field is always absent.
    """
    values = gray.values
    mean = _local_mean(values, ADAPTIVE_WINDOW)
    candidates = []
    for mask in (values < mean - ADAPTIVE_OFFSET, values > mean + ADAPTIVE_OFFSET):
        if mask.mean() > MAX_MASK_DENSITY:
            continue
        for x, y, w, h, area, sub in _component_boxes(mask):
            if not MIN_COMPONENT_AREA <= area <= MAX_COMPONENT_AREA:
                continue
            aspect = w / h
            if not MIN_ASPECT <= aspect <= MAX_ASPECT:
                continue
            fill = area / (w * h)
            if not MIN_FILL_RATIO <= fill <= MAX_FILL_RATIO:
                continue
            candidates.append((x, y, w, h, _stroke_confidence(sub)))

    merged = _merge_into_lines(candidates)
    regions = []
    for x, y, w, h, conf, heights in merged:
        est = int(round(float(np.median(heights))))
        regions.append(TextRegion(x=x, y=y, w=w, h=h, est_height=max(1, est), confidence=conf))
    regions.sort(key=lambda r: (r.y, r.x))
    return regions


def _merge_into_lines(
    candidates: list[tuple[int, int, int, int, float]],
) -> list[tuple[int, int, int, float, float, list[int]]]:
    """Union components on the same text line into single boxes."""
    n = len(candidates)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    order = sorted(range(n), key=lambda i: candidates[i][0])
    for a_pos, i in enumerate(order):
        xi, yi, wi, hi, _ = candidates[i]
        for j in order[a_pos + 1 :]:
            xj, yj, wj, hj, _ = candidates[j]
            gap = xj - (xi + wi)
            if gap > max(hi, hj):
                break
            overlap = min(yi + hi, yj + hj) - max(yi, yj)
            if overlap > 0.5 * min(hi, hj):
                union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        xs = [candidates[i][0] for i in members]
        ys = [candidates[i][1] for i in members]
        x2s = [candidates[i][0] + candidates[i][2] for i in members]
        y2s = [candidates[i][1] + candidates[i][3] for i in members]
        confs = [candidates[i][4] for i in members]
        heights = [candidates[i][3] for i in members]
        x, y = min(xs), min(ys)
        out.append((x, y, max(x2s) - x, max(y2s) - y, float(np.mean(confs)), heights))
    return out


def legibility_flags(
    regions: list[TextRegion], min_height: int = DEFAULT_MIN_TEXT_HEIGHT
) -> list[LegibilityWarning]:
    """One too_small warning per region whose estimated height is below the bar."""
    return [
        LegibilityWarning(region=r, reason="too_small", threshold=float(min_height))
        for r in regions
        if r.est_height < min_height
    ]


def _iou(a: TextRegion, b: TextRegion) -> float:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union else 0.0


def merge_ocr_results(
    builtin: list[TextRegion], external: list[TextRegion]
) -> list[TextRegion]:
    """Fold external OCR results over the built-in detector's output.

    External regions (which carry recognized text) win; built-in regions
    overlapping one of them with IoU > 0.5 are dropped, the rest appended.
    """
    kept = [b for b in builtin if all(_iou(b, e) <= 0.5 for e in external)]
    return list(external) + kept
