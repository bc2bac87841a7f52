"""Shared numeric-accuracy metric for regression answers."""

from __future__ import annotations

import numpy as np

# Confidence thresholds for mean relative accuracy: 0.50, 0.55, ..., 0.95.
MRA_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


def mean_relative_accuracy(pred: float, gt: float) -> float:
    """Mean over thresholds theta of 1[|pred - gt| / |gt| < 1 - theta].

    gt == 0 is scored as exact-match (1.0 iff pred == 0): the relative error
    is undefined there and regression ground truths are nonzero in practice.
    """
    if not (np.isfinite(pred) and np.isfinite(gt)):
        return 0.0
    if gt == 0.0:
        return 1.0 if pred == 0.0 else 0.0
    rel = abs(pred - gt) / abs(gt)
    hits = sum(1 for theta in MRA_THRESHOLDS if rel < 1.0 - theta)
    return hits / len(MRA_THRESHOLDS)
