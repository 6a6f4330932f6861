"""Binary segmentation metrics: per-image mean IoU and aggregated IoU.

Naming warning: this tool follows the convention where **cIoU** is the
per-image class-balanced mean IoU (empty-empty scored 1, half-empty 0)
and **gIoU** is the ratio of summed intersections to summed unions over
the whole set. Some reasoning-segmentation literature swaps these two
names; check which convention a number you are comparing against uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .mask import Mask


@dataclass(frozen=True)
class MaskPair:
    scene_id: str
    pred: Mask
    truth: Mask

    def __post_init__(self):
        if (self.pred.width, self.pred.height) != (self.truth.width, self.truth.height):
            raise DimensionMismatch(
                f"{self.scene_id}: pred {self.pred.width}x{self.pred.height} "
                f"vs truth {self.truth.width}x{self.truth.height}"
            )


@dataclass(frozen=True)
class SegReport:
    ciou: float
    giou: float
    n_images: int
    per_image: tuple[tuple[str, float], ...]
    ciou_stderr: float
    giou_bootstrap_sd: float


def _counts(pred: Mask, truth: Mask) -> tuple[int, int]:
    inter = int((pred.bits & truth.bits).sum())
    union = int((pred.bits | truth.bits).sum())
    return inter, union


def image_iou(pred: Mask, truth: Mask) -> float:
    """|pred & truth| / |pred | truth|; both empty scores 1, one empty scores 0."""
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise DimensionMismatch(
            f"pred {pred.width}x{pred.height} vs truth {truth.width}x{truth.height}"
        )
    inter, union = _counts(pred, truth)
    if union == 0:
        return 1.0
    return inter / union


def _sorted_pairs(pairs: Sequence[MaskPair]) -> list[MaskPair]:
    return sorted(pairs, key=lambda p: p.scene_id)


def ciou(pairs: Sequence[MaskPair]) -> float:
    """Arithmetic mean of per-image IoU, summed in scene_id order."""
    if not pairs:
        raise EmptyInput("ciou needs at least one pair")
    total = 0.0
    for pair in _sorted_pairs(pairs):
        total += image_iou(pair.pred, pair.truth)
    return total / len(pairs)


def giou(pairs: Sequence[MaskPair]) -> float:
    """Summed intersections over summed unions; an all-empty set scores 1."""
    if not pairs:
        raise EmptyInput("giou needs at least one pair")
    inter_sum = 0
    union_sum = 0
    for pair in _sorted_pairs(pairs):
        inter, union = _counts(pair.pred, pair.truth)
        inter_sum += inter
        union_sum += union
    if union_sum == 0:
        return 1.0
    return inter_sum / union_sum


def ciou_stderr(ious: Sequence[float]) -> float:
    """Standard error of the per-image IoU mean (0 for a single image)."""
    n = len(ious)
    if n < 2:
        return 0.0
    return float(np.std(np.asarray(ious, dtype=np.float64), ddof=1)) / math.sqrt(n)


def giou_bootstrap_sd(
    pairs: Sequence[MaskPair], n_boot: int = 1000, seed: int = 42
) -> float:
    """Bootstrap standard deviation of gIoU (resample pairs with replacement)."""
    if not pairs:
        raise EmptyInput("giou_bootstrap_sd needs at least one pair")
    counts = [_counts(p.pred, p.truth) for p in _sorted_pairs(pairs)]
    rng = np.random.default_rng(seed)
    n = len(counts)
    values = np.empty(n_boot, dtype=np.float64)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        inter_sum = sum(counts[i][0] for i in idx)
        union_sum = sum(counts[i][1] for i in idx)
        values[b] = 1.0 if union_sum == 0 else inter_sum / union_sum
    return float(np.std(values))


def seg_report(pairs: Sequence[MaskPair]) -> SegReport:
    """Full report: both IoU variants, per-image breakdown, uncertainty."""
    if not pairs:
        raise EmptyInput("seg_report needs at least one pair")
    ordered = _sorted_pairs(pairs)
    per_image = tuple((p.scene_id, image_iou(p.pred, p.truth)) for p in ordered)
    ious = [v for _, v in per_image]
    return SegReport(
        ciou=ciou(pairs),
        giou=giou(pairs),
        n_images=len(pairs),
        per_image=per_image,
        ciou_stderr=ciou_stderr(ious),
        giou_bootstrap_sd=giou_bootstrap_sd(pairs),
    )
