"""
Evaluation
Cross-validated and out-of-time evaluation of ridge models on a featurized
modeling dataset.

Cross-validation pools the holdout scores of every fold and computes AUC
and top-fraction capture once on the pooled vector.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from Models.ridge_model import RidgeModel, fit_ridge, score_matrix, select_lambda
from utils.cohort_store import format_timestamp
from utils.errors import FeatureDimensionError, FoldTrainingError, SepsisLensError
from utils.metrics import CaptureRow, auc, top_fraction_capture
from utils.splits import stratified_fold_indices, temporal_mask
from utils.windowing import ModelingDataset

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.01, 0.05, 0.10)


# =====================================================
# TYPES
# =====================================================

@dataclass(frozen=True)
class FeatureMatrix:
    """Featurized dataset: rows in encounter_id order"""

    ids: List[str]
    X: np.ndarray
    y: np.ndarray
    admit_times: List[datetime]
    feature_labels: List[str]

    def __post_init__(self):
        n = len(self.ids)
        if self.X.shape[0] != n or self.y.shape != (n,) or len(self.admit_times) != n:
            raise FeatureDimensionError(
                f"feature matrix rows disagree: {n} ids, X {self.X.shape}, y {self.y.shape}"
            )
        if self.X.shape[1] != len(self.feature_labels):
            raise FeatureDimensionError(
                f"{self.X.shape[1]} feature columns but {len(self.feature_labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_dataset(cls, dataset: ModelingDataset, X: np.ndarray, feature_labels: Sequence[str]) -> "FeatureMatrix":
        return cls(
            ids=dataset.encounter_ids,
            X=np.asarray(X, dtype=np.float64),
            y=dataset.labels,
            admit_times=[row.admit_time for row in dataset.rows],
            feature_labels=list(feature_labels),
        )

    def subset(self, mask: np.ndarray) -> "FeatureMatrix":
        idx = np.flatnonzero(mask)
        return FeatureMatrix(
            ids=[self.ids[i] for i in idx],
            X=self.X[idx],
            y=self.y[idx],
            admit_times=[self.admit_times[i] for i in idx],
            feature_labels=list(self.feature_labels),
        )


@dataclass(frozen=True)
class ModelConfig:
    lam: float = 1.0
    select_lambda: bool = False
    lambda_grid: Tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    inner_folds: int = 3
    standardize: bool = True

    @classmethod
    def from_config(cls, section: dict) -> "ModelConfig":
        return cls(
            lam=float(section["lambda"]),
            select_lambda=bool(section["select_lambda"]),
            lambda_grid=tuple(float(g) for g in section["lambda_grid"]),
            inner_folds=int(section["inner_folds"]),
            standardize=bool(section["standardize"]),
        )


@dataclass
class EvaluationReport:
    auc: float
    captures: List[CaptureRow]
    n: int
    positives: int
    split: Dict
    lambdas: List[float]
    feature_count: int
    modality: str = ""
    horizon_hours: Optional[float] = None
    config_fingerprint: str = ""
    dataset_stats: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "captures": [c.to_dict() for c in self.captures],
            "n": self.n,
            "positives": self.positives,
            "split": dict(self.split),
            "lambdas": list(self.lambdas),
            "feature_count": self.feature_count,
            "modality": self.modality,
            "horizon_hours": self.horizon_hours,
            "config_fingerprint": self.config_fingerprint,
            "dataset_stats": dict(self.dataset_stats),
        }


# =====================================================
# TRAINING
# =====================================================

def fit_model(X: np.ndarray, y: np.ndarray, model_config: ModelConfig, seed: int, feature_labels=None) -> RidgeModel:
    """Fit with the configured lambda, or pick one by inner CV first"""
    lam = model_config.lam
    if model_config.select_lambda:
        lam = select_lambda(
            X,
            y,
            grid=model_config.lambda_grid,
            inner_folds=model_config.inner_folds,
            seed=seed,
            standardize=model_config.standardize,
        )
    return fit_ridge(X, y, lam, standardize=model_config.standardize, feature_labels=feature_labels)


def _pooled_report(scores: np.ndarray, matrix: FeatureMatrix, fractions, split: Dict, lambdas) -> EvaluationReport:
    captures = [top_fraction_capture(scores, matrix.y, p, ids=matrix.ids) for p in fractions]
    return EvaluationReport(
        auc=auc(scores, matrix.y),
        captures=captures,
        n=len(matrix),
        positives=int(matrix.y.sum()),
        split=split,
        lambdas=[float(lam) for lam in lambdas],
        feature_count=int(matrix.X.shape[1]),
    )


def _scores_frame(ids, scores, labels, folds) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "encounter_id": list(ids),
            "score": np.asarray(scores, dtype=np.float64),
            "label": np.asarray(labels, dtype=int),
            "fold": list(folds),
        }
    )


# =====================================================
# CROSS-VALIDATION
# =====================================================

def cross_validate(
    matrix: FeatureMatrix,
    k: int,
    model_config: ModelConfig,
    seed: int,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    n_jobs: int = 1,
) -> Tuple[EvaluationReport, pd.DataFrame]:
    """
    Stratified k-fold CV with pooled holdout metrics.

    Folds may train concurrently; results are gathered in fold order so the
    pooled vector does not depend on scheduling.

    Returns:
        (report, scores frame with columns encounter_id, score, label, fold)

    Raises:
        SplitError: too few rows per class for k folds
        FoldTrainingError: a fold failed to train, with its index
    """
    folds = stratified_fold_indices(matrix.y, k, seed)

    def run_fold(fold: int):
        held = folds == fold
        try:
            model = fit_model(
                matrix.X[~held], matrix.y[~held], model_config, seed, feature_labels=matrix.feature_labels
            )
            return model.lam, score_matrix(model, matrix.X[held])
        except SepsisLensError as e:
            raise FoldTrainingError(fold, e) from e

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(fold) for fold in range(k)]

    scores = np.empty(len(matrix), dtype=np.float64)
    lambdas = []
    for fold, (lam, fold_scores) in enumerate(results):
        scores[folds == fold] = fold_scores
        lambdas.append(lam)
        logger.debug("Fold %d: %d holdout rows, lambda=%g", fold, int((folds == fold).sum()), lam)

    report = _pooled_report(scores, matrix, fractions, {"kind": "cv", "folds": k, "seed": seed}, lambdas)
    logger.info("%d-fold CV: n=%d positives=%d pooled AUC=%.4f", k, report.n, report.positives, report.auc)
    return report, _scores_frame(matrix.ids, scores, matrix.y, folds.tolist())


# =====================================================
# OUT-OF-TIME EVALUATION
# =====================================================

def holdout_evaluate(
    matrix: FeatureMatrix,
    cutoff: datetime,
    model_config: ModelConfig,
    seed: int,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
) -> Tuple[EvaluationReport, pd.DataFrame]:
    """
    Train on rows admitted before the cutoff, evaluate on the rest.

    Raises:
        SplitError: either side is empty
        FoldTrainingError: training failed (fold index 0)
    """
    train_mask = temporal_mask(matrix.admit_times, cutoff)
    train, test = matrix.subset(train_mask), matrix.subset(~train_mask)
    try:
        model = fit_model(train.X, train.y, model_config, seed, feature_labels=matrix.feature_labels)
    except SepsisLensError as e:
        raise FoldTrainingError(0, e) from e

    scores = score_matrix(model, test.X)
    split = {"kind": "temporal", "cutoff": format_timestamp(cutoff), "train_rows": len(train), "test_rows": len(test)}
    report = _pooled_report(scores, test, fractions, split, [model.lam])
    logger.info(
        "Temporal holdout: %d train / %d test, test AUC=%.4f", len(train), len(test), report.auc
    )
    return report, _scores_frame(test.ids, scores, test.y, ["test"] * len(test))


def fit_final_model(
    matrix: FeatureMatrix,
    model_config: ModelConfig,
    seed: int,
    cutoff: Optional[datetime] = None,
) -> RidgeModel:
    """Model written out with a run: all rows for CV, the training side for temporal splits"""
    if cutoff is not None:
        matrix = matrix.subset(temporal_mask(matrix.admit_times, cutoff))
    return fit_model(matrix.X, matrix.y, model_config, seed, feature_labels=matrix.feature_labels)
