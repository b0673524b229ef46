"""Gaze/saliency heatmap evaluation: confusion fractions, precision/recall, KL.

Predicted and reference maps are binarized identically (threshold 0.5,
half rounds up) and compared pixelwise; the divergence variant treats both
maps as probability distributions after eps-regularized normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroMap, DimensionMismatch
from .image import Heatmap


@dataclass(frozen=True)
class BinaryMask:
    """Row-major boolean grid."""

    bits: np.ndarray  # (h, w) bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))
        if self.bits.ndim != 2:
            raise ValueError(f"expected (h, w) array, got {self.bits.shape}")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class ConfusionFractions:
    """Pixel fractions; tp + tn + fp + fn == 1 within 1e-9."""

    tp: float
    tn: float
    fp: float
    fn: float


def binarize(hm: Heatmap) -> BinaryMask:
    """Round each pixel to 0 or 1: values >= 0.5 become set bits."""
    return BinaryMask(bits=hm.values >= 0.5)


def confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionFractions:
    """Pixelwise TP/TN/FP/FN fractions of pred against gt."""
    if pred.bits.shape != gt.bits.shape:
        raise DimensionMismatch(
            f"pred {pred.width}x{pred.height} vs gt {gt.width}x{gt.height}"
        )
    total = pred.bits.size
    tp = int(np.count_nonzero(pred.bits & gt.bits))
    tn = int(np.count_nonzero(~pred.bits & ~gt.bits))
    fp = int(np.count_nonzero(pred.bits & ~gt.bits))
    fn = total - tp - tn - fp
    return ConfusionFractions(tp=tp / total, tn=tn / total, fp=fp / total, fn=fn / total)


def precision_recall(c: ConfusionFractions) -> tuple[float, float]:
    """precision = tp/(tp+fp), recall = tp/(tp+fn); 0 when undefined."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else 0.0
    return precision, recall


def kl_divergence(gt: Heatmap, pred: Heatmap, eps: float = 1e-7) -> float:
    """KL(gt || pred) in nats over eps-regularized, sum-normalized maps."""
    if gt.values.shape != pred.values.shape:
        raise DimensionMismatch(
            f"gt {gt.width}x{gt.height} vs pred {pred.width}x{pred.height}"
        )
    if gt.values.sum() == 0 or pred.values.sum() == 0:
        raise AllZeroMap("both maps need at least one positive value")
    p = gt.values + eps
    q = pred.values + eps
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)))
