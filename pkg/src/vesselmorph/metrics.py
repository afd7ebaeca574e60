"""Segmentation-accuracy and morphometry-bias metrics.

Pairwise overlap (IoU, Dice) between masks, their per-image averages over
parallel label sets, per-image tortuosity ratios, and the repetition
schedule that balances sampling noise in the fine-tuning sweep. All
aggregation uses compensated summation so results are independent of
evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import BinaryMask

__all__ = [
    "LabelSet",
    "TortuositySet",
    "iou",
    "dice",
    "relative_iou",
    "relative_tortuosity",
    "repetitions",
]


@dataclass(frozen=True)
class LabelSet:
    labels: tuple[BinaryMask, ...]
    ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.ids):
            raise ValueError("labels and ids must be parallel")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")


@dataclass(frozen=True)
class TortuositySet:
    values: tuple[float, ...]
    ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.ids):
            raise ValueError("values and ids must be parallel")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")
        for i, v in zip(self.ids, self.values):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"tortuosity for {i!r} must be finite and >= 0, got {v}")


def _counts(a: BinaryMask, b: BinaryMask) -> tuple[int, int, int]:
    if a.bits.shape != b.bits.shape:
        raise ValueError(f"mask dimensions differ: {a.bits.shape} vs {b.bits.shape}")
    inter = int(np.count_nonzero(a.bits & b.bits))
    return inter, a.count(), b.count()


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    inter, na, nb = _counts(a, b)
    union = na + nb - inter
    return 1.0 if union == 0 else inter / union


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """Dice coefficient 2|A.B|/(|A|+|B|); 1.0 when both masks are empty."""
    inter, na, nb = _counts(a, b)
    return 1.0 if na + nb == 0 else 2.0 * inter / (na + nb)


def _pair_by_id(xs_ids, ys_ids, label: str):
    if set(xs_ids) != set(ys_ids):
        missing = set(xs_ids) ^ set(ys_ids)
        raise ValueError(f"{label}: ids do not match, mismatched ids {sorted(missing)[:5]}")


def relative_iou(pred: LabelSet, ref: LabelSet) -> float:
    """Mean per-image IoU between two label sets matched by id."""
    if not pred.ids:
        raise ValueError("relative_iou requires non-empty label sets")
    _pair_by_id(pred.ids, ref.ids, "relative_iou")
    by_id = dict(zip(ref.ids, ref.labels))
    return math.fsum(iou(p, by_id[i]) for p, i in zip(pred.labels, pred.ids)) / len(pred.ids)


def relative_tortuosity(num: TortuositySet, den: TortuositySet) -> float:
    """Mean per-image ratio num/den matched by id (mean of ratios)."""
    if not num.ids:
        raise ValueError("relative_tortuosity requires non-empty sets")
    _pair_by_id(num.ids, den.ids, "relative_tortuosity")
    den_by_id = dict(zip(den.ids, den.values))
    for i in num.ids:
        if den_by_id[i] <= 0:
            raise ValueError(
                f"relative_tortuosity: denominator for id {i!r} is {den_by_id[i]}, must be > 0"
            )
    return math.fsum(v / den_by_id[i] for v, i in zip(num.values, num.ids)) / len(num.ids)


def repetitions(l: int, n: int) -> int:
    """Repetition count for a fine-tuning sample size: max(5, ceil(l / 2n)).

    n = 0 is the deterministic no-fine-tuning case and uses one repetition.
    """
    if l < 1:
        raise ValueError("training-set size l must be >= 1")
    if n < 0:
        raise ValueError("sample count n must be >= 0")
    if n == 0:
        return 1
    return max(5, math.ceil(l / (2 * n)))
