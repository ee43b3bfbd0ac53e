"""
Ranking metrics: rank-based AUC and top-k% capture.
"""

from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from utils.errors import MetricError


def round_half_away(value) -> int:
    """Nearest integer, halves away from zero, computed in exact decimal"""
    return int(Decimal(str(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def selection_size(n: int, p: float) -> int:
    """round(n * p) with the product taken in exact decimal"""
    return int((Decimal(int(n)) * Decimal(str(p))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def percent(numerator: int, denominator: int) -> int:
    """Nearest-integer percentage, as printed in the report tables"""
    if denominator == 0:
        return 0
    return int((Decimal(100 * int(numerator)) / Decimal(int(denominator))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


# =====================================================
# AUC
# =====================================================

def auc(scores, labels) -> float:
    """
    Mann-Whitney AUC: probability a random positive outscores a random
    negative, tied pairs counting one half.

    Raises:
        MetricError: when labels hold a single class
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape:
        raise MetricError(f"scores and labels differ in length: {scores.size} vs {labels.size}")

    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs at least one positive and one negative")

    # average ranks are half-integers, so the rank sum is exact
    ranks = rankdata(scores, method="average")
    u_statistic = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


# =====================================================
# TOP-FRACTION CAPTURE
# =====================================================

@dataclass(frozen=True)
class CaptureRow:
    fraction: float
    k_selected: int
    positives_found: int
    total_positives: int
    precision: float
    recall: float

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def precision_pct(self) -> int:
        return percent(self.positives_found, self.k_selected)

    @property
    def recall_pct(self) -> int:
        return percent(self.positives_found, self.total_positives)


def capture_row(n: int, p: float, positives_found: int, total_positives: int) -> CaptureRow:
    """Capture arithmetic from counts alone"""
    if not 0 < p <= 1:
        raise MetricError(f"fraction must be in (0, 1], got {p}")
    k = selection_size(n, p)
    if k == 0:
        raise MetricError(f"top {p:.2%} of {n} rows selects nothing")
    if not 0 <= positives_found <= min(k, total_positives):
        raise MetricError(f"{positives_found} positives cannot be found among {k} selected / {total_positives} total")
    return CaptureRow(
        fraction=float(p),
        k_selected=k,
        positives_found=int(positives_found),
        total_positives=int(total_positives),
        precision=positives_found / k,
        recall=positives_found / total_positives if total_positives else 0.0,
    )


def rank_order(scores, ids: Optional[Sequence[str]] = None) -> np.ndarray:
    """Indices by descending score; ties by ascending id (or position)"""
    scores = np.asarray(scores, dtype=np.float64)
    if ids is None:
        tie_key = np.arange(scores.size)
    else:
        tie_key = np.asarray([str(i) for i in ids])
    return np.lexsort((tie_key, -scores))


def top_predicted_ids(ids: Sequence[str], scores, p: float) -> List[str]:
    k = selection_size(len(ids), p)
    if k == 0:
        raise MetricError(f"top {p:.2%} of {len(ids)} rows selects nothing")
    order = rank_order(scores, ids)
    return [ids[i] for i in order[:k]]


def top_fraction_capture(scores, labels, p: float, ids: Optional[Sequence[str]] = None) -> CaptureRow:
    """
    Precision and recall among the round(n * p) highest-scored rows.

    Args:
        scores: model scores
        labels: 0/1 targets
        p: fraction in (0, 1]
        ids: encounter ids, used to break ties at the selection boundary
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if not 0 < p <= 1:
        raise MetricError(f"fraction must be in (0, 1], got {p}")
    k = selection_size(scores.size, p)
    if k == 0:
        raise MetricError(f"top {p:.2%} of {scores.size} rows selects nothing")

    selected = rank_order(scores, ids)[:k]
    found = int(labels[selected].sum())
    return capture_row(scores.size, p, found, int(labels.sum()))
