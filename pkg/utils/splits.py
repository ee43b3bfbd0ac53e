"""
Splits: stratified k-fold assignment and out-of-time (temporal) splits.
"""

import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, Sequence, Tuple

import numpy as np

from utils.errors import SplitError
from utils.windowing import DatasetRow, ModelingDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    folds: Dict[str, int]

    def members(self, fold: int):
        return sorted(eid for eid, f in self.folds.items() if f == fold)


def stratified_fold_indices(labels, k: int, seed: int) -> np.ndarray:
    """
    Fold index per row: each class is shuffled with the seed and dealt
    round-robin, negatives continuing where positives stopped.

    Raises:
        SplitError: k < 2 or fewer than k rows in a class
    """
    labels = np.asarray(labels).astype(int)
    if k < 2:
        raise SplitError(f"need at least 2 folds, got {k}")

    positives = np.flatnonzero(labels == 1)
    negatives = np.flatnonzero(labels == 0)
    if positives.size < k or negatives.size < k:
        raise SplitError(
            f"{k} folds need at least {k} positives and {k} negatives "
            f"(have {positives.size} and {negatives.size})"
        )

    rng = np.random.default_rng(seed)
    folds = np.empty(labels.size, dtype=int)
    positives = rng.permutation(positives)
    negatives = rng.permutation(negatives)
    folds[positives] = np.arange(positives.size) % k
    folds[negatives] = (np.arange(negatives.size) + positives.size) % k
    return folds


def stratified_folds(dataset: ModelingDataset, k: int, seed: int) -> FoldAssignment:
    """Stratified fold assignment over the dataset's (id-sorted) rows"""
    folds = stratified_fold_indices(dataset.labels, k, seed)
    return FoldAssignment(k=k, folds={row.encounter_id: int(f) for row, f in zip(dataset.rows, folds)})


def temporal_split(dataset: ModelingDataset, cutoff: datetime) -> Tuple[Tuple[DatasetRow, ...], Tuple[DatasetRow, ...]]:
    """
    Rows admitted before the cutoff train; rows admitted on/after it test.

    Raises:
        SplitError: when either side is empty
    """
    train = tuple(row for row in dataset.rows if row.admit_time < cutoff)
    test = tuple(row for row in dataset.rows if row.admit_time >= cutoff)
    if not train:
        raise SplitError(f"no rows admitted before {cutoff.isoformat()}: empty training side")
    if not test:
        raise SplitError(f"no rows admitted on or after {cutoff.isoformat()}: empty test side")
    logger.info("Temporal split at %s: %d train / %d test", cutoff.isoformat(), len(train), len(test))
    return train, test


def temporal_mask(admit_times: Sequence[datetime], cutoff: datetime) -> np.ndarray:
    """True for training rows"""
    mask = np.array([t < cutoff for t in admit_times], dtype=bool)
    if not mask.any():
        raise SplitError(f"no rows admitted before {cutoff.isoformat()}: empty training side")
    if mask.all():
        raise SplitError(f"no rows admitted on or after {cutoff.isoformat()}: empty test side")
    return mask
