"""
Ridge Regression Model
L2-regularized linear scoring of feature vectors, fit on 0/1 targets and
used only for ranking.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.preprocessing import StandardScaler

from utils.errors import FeatureDimensionError, RidgeSolveError, SplitError
from utils.metrics import auc
from utils.splits import stratified_fold_indices

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1.0
DEFAULT_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


# =====================================================
# STANDARDIZER
# =====================================================

@dataclass(frozen=True)
class Standardizer:
    """Z-scores from training statistics; constant columns map to 0"""

    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        scaler = StandardScaler().fit(X)
        constant = np.ptp(X, axis=0) == 0
        scale = np.where(constant, 1.0, scaler.scale_)
        return cls(mean=scaler.mean_.copy(), scale=scale, constant=constant)

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(mean=np.zeros(d), scale=np.ones(d), constant=np.zeros(d, dtype=bool))

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        if self.constant.any():
            Z[..., self.constant] = 0.0
        return Z

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Standardizer":
        return cls(
            mean=np.asarray(raw["mean"], dtype=np.float64),
            scale=np.asarray(raw["scale"], dtype=np.float64),
            constant=np.asarray(raw["constant"], dtype=bool),
        )


# =====================================================
# MODEL
# =====================================================

@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    intercept: float
    lam: float
    standardizer: Standardizer
    feature_labels: List[str] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return int(self.weights.size)

    def to_dict(self) -> dict:
        return {
            "feature_labels": list(self.feature_labels),
            "weights": self.weights.tolist(),
            "intercept": float(self.intercept),
            "lambda": float(self.lam),
            "standardizer": self.standardizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RidgeModel":
        weights = np.asarray(raw["weights"], dtype=np.float64)
        labels = list(raw.get("feature_labels") or [])
        if labels and len(labels) != weights.size:
            raise FeatureDimensionError(f"{len(labels)} feature labels for {weights.size} weights")
        return cls(
            weights=weights,
            intercept=float(raw["intercept"]),
            lam=float(raw["lambda"]),
            standardizer=Standardizer.from_dict(raw["standardizer"]),
            feature_labels=labels,
        )


def save_model(model: RidgeModel, path) -> None:
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> RidgeModel:
    return RidgeModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# =====================================================
# FIT / SCORE
# =====================================================

def fit_ridge(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = DEFAULT_LAMBDA,
    standardize: bool = True,
    feature_labels: Optional[Sequence[str]] = None,
) -> RidgeModel:
    """
    Solve (Z'Z + lam*I) w = Z'(y - mean(y)) by Cholesky factorization.

    Z is X after the training-fold standardizer (or X itself when
    standardize is False); the intercept is mean(y) and is not penalized.

    Raises:
        RidgeSolveError: lam < 0, bad shapes, or a singular system at lam == 0
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise RidgeSolveError(f"X must be a non-empty 2-d matrix, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise RidgeSolveError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if lam < 0:
        raise RidgeSolveError(f"lambda must be >= 0, got {lam}")

    n, d = X.shape
    standardizer = Standardizer.fit(X) if standardize else Standardizer.identity(d)
    Z = standardizer.transform(X)

    y_mean = float(y.mean())
    gram = Z.T @ Z
    if lam > 0:
        gram[np.diag_indices(d)] += lam
    rhs = Z.T @ (y - y_mean)

    if lam == 0 and np.linalg.matrix_rank(Z) < d:
        raise RidgeSolveError("design matrix is rank deficient at lambda = 0; use lambda > 0")
    try:
        factor = cho_factor(gram, lower=False, check_finite=True)
        weights = cho_solve(factor, rhs)
    except (LinAlgError, ValueError) as e:
        raise RidgeSolveError(f"normal equations are singular ({e}); use lambda > 0") from e

    if not np.all(np.isfinite(weights)):
        raise RidgeSolveError("solver produced non-finite weights")

    labels = list(feature_labels) if feature_labels is not None else [f"f{i}" for i in range(d)]
    if len(labels) != d:
        raise FeatureDimensionError(f"{len(labels)} feature labels for {d} features")

    logger.debug("Fitted ridge: n=%d d=%d lambda=%g |w|=%.4g", n, d, lam, float(np.linalg.norm(weights)))
    return RidgeModel(
        weights=weights,
        intercept=y_mean,
        lam=float(lam),
        standardizer=standardizer,
        feature_labels=labels,
    )


def score_matrix(model: RidgeModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dimension:
        raise FeatureDimensionError(f"expected {model.dimension} features, got shape {X.shape}")
    return model.intercept + model.standardizer.transform(X) @ model.weights


def score(model: RidgeModel, x) -> float:
    """intercept + w . standardize(x)"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dimension,):
        raise FeatureDimensionError(f"expected {model.dimension} features, got {x.size}")
    return float(score_matrix(model, x[np.newaxis, :])[0])


# =====================================================
# LAMBDA SELECTION
# =====================================================

def select_lambda(
    X: np.ndarray,
    y: np.ndarray,
    grid: Sequence[float] = DEFAULT_GRID,
    inner_folds: int = 3,
    seed: int = 0,
    standardize: bool = True,
) -> float:
    """
    Lambda with the best mean inner-fold AUC; ties go to the larger lambda.

    Inner folds whose training or holdout side has a single class are
    skipped with a warning, as are lambdas the solver rejects.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise RidgeSolveError("lambda grid is empty")
    if len(grid) == 1:
        return grid[0]

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(int)
    try:
        folds = stratified_fold_indices(y, inner_folds, seed)
    except SplitError as e:
        logger.warning("Cannot build %d inner folds (%s); using largest lambda", inner_folds, e)
        return max(grid)

    usable = []
    for fold in range(inner_folds):
        held = folds == fold
        if len(np.unique(y[~held])) < 2 or len(np.unique(y[held])) < 2:
            logger.warning("Skipping inner fold %d: single class", fold)
            continue
        usable.append(held)

    best_lam, best_auc = max(grid), -np.inf
    for lam in sorted(grid):
        fold_aucs = []
        for held in usable:
            try:
                model = fit_ridge(X[~held], y[~held], lam, standardize=standardize)
            except RidgeSolveError as e:
                logger.warning("lambda=%g rejected on an inner fold: %s", lam, e)
                fold_aucs = []
                break
            fold_aucs.append(auc(score_matrix(model, X[held]), y[held]))
        if not fold_aucs:
            continue
        mean_auc = float(np.mean(fold_aucs))
        logger.debug("lambda=%g inner AUC=%.4f", lam, mean_auc)
        # ascending grid with >= keeps the larger lambda on ties
        if mean_auc >= best_auc:
            best_lam, best_auc = lam, mean_auc

    logger.info("Selected lambda=%g (inner AUC %.4f)", best_lam, best_auc)
    return best_lam
