"""The four evaluation metrics over per-point affordance maps.

Conventions follow the affordance-grounding evaluation lineage:
thresholded IoU, rank-based ROC AUC with tie correction, histogram-
intersection similarity over unit-mass score vectors, and raw pointwise
mean absolute error.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateGroundTruth, LengthMismatch, ZeroMassMap

IOU_THRESHOLD = 0.5
GT_BINARIZE_THRESHOLD = 0.5


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(getattr(pred, "scores", pred), dtype=np.float64).reshape(-1)
    g = np.asarray(getattr(gt, "scores", gt), dtype=np.float64).reshape(-1)
    if p.shape != g.shape:
        raise LengthMismatch(f"pred has {p.shape[0]} scores, gt has {g.shape[0]}")
    return p, g


def miou(pred, gt, threshold: float = IOU_THRESHOLD) -> float:
    """IoU of thresholded masks; both-empty counts as perfect overlap."""
    p, g = _pair(pred, gt)
    pm = p >= threshold
    gm = g >= GT_BINARIZE_THRESHOLD
    union = np.logical_or(pm, gm).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pm, gm).sum() / union)


def auc(pred, gt) -> float:
    """ROC AUC via the Mann-Whitney rank statistic; ties contribute 1/2."""
    p, g = _pair(pred, gt)
    gm = g >= GT_BINARIZE_THRESHOLD
    n_pos = int(gm.sum())
    n_neg = int(len(gm) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateGroundTruth("AUC needs at least one positive and one negative")
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    # midranks: average rank over each tie group (1-based)
    ranks = np.empty(len(p))
    i = 0
    while i < len(p):
        j = i
        while j + 1 < len(p) and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[gm].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def sim(pred, gt) -> float:
    """Histogram intersection of the two score vectors normalized to sum 1."""
    p, g = _pair(pred, gt)
    ps, gs = p.sum(), g.sum()
    if ps <= 0.0 or gs <= 0.0:
        raise ZeroMassMap("both maps need positive total mass")
    return float(np.minimum(p / ps, g / gs).sum())


def mae(pred, gt) -> float:
    """Mean absolute error on the raw [0,1] scores."""
    p, g = _pair(pred, gt)
    return float(np.abs(p - g).mean())
