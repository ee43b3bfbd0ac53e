from datetime import timedelta

import numpy as np
import pytest

from builders import T0
from utils.errors import FeatureDimensionError, FoldTrainingError, SplitError
from utils.evaluation import (
    FeatureMatrix,
    ModelConfig,
    cross_validate,
    fit_final_model,
    holdout_evaluate,
)


def make_matrix(X, y):
    n = len(y)
    return FeatureMatrix(
        ids=[f"E{i:04d}" for i in range(n)],
        X=np.asarray(X, dtype=float),
        y=np.asarray(y, dtype=int),
        admit_times=[T0 + timedelta(hours=i) for i in range(n)],
        feature_labels=[f"x{j}" for j in range(np.asarray(X).shape[1])],
    )


@pytest.fixture
def noisy_matrix():
    rng = np.random.default_rng(0)
    y = (rng.random(300) < 0.2).astype(int)
    X = np.column_stack([y + rng.normal(scale=1.0, size=300), rng.normal(size=(300, 4))])
    return make_matrix(X, y)


class TestCrossValidate:
    def test_oracle_feature_is_perfect(self):
        rng = np.random.default_rng(1)
        y = np.array([1] * 20 + [0] * 80)
        X = (y + rng.normal(scale=0.01, size=100))[:, None]
        report, scores = cross_validate(make_matrix(X, y), 3, ModelConfig(), seed=0)
        assert report.auc == 1.0
        assert report.captures[2].positives_found == 10

    def test_pooled_vector_covers_every_row_once(self, noisy_matrix):
        report, scores = cross_validate(noisy_matrix, 3, ModelConfig(), seed=4)
        assert report.n == len(noisy_matrix) == len(scores)
        assert scores["encounter_id"].tolist() == noisy_matrix.ids
        assert sorted(scores["fold"].unique()) == [0, 1, 2]
        assert report.split == {"kind": "cv", "folds": 3, "seed": 4}
        assert report.lambdas == [1.0, 1.0, 1.0]

    def test_deterministic_across_workers(self, noisy_matrix):
        first, scores_a = cross_validate(noisy_matrix, 3, ModelConfig(), seed=2)
        second, scores_b = cross_validate(noisy_matrix, 3, ModelConfig(), seed=2, n_jobs=3)
        assert first.to_dict() == second.to_dict()
        np.testing.assert_array_equal(scores_a["score"].to_numpy(), scores_b["score"].to_numpy())

    def test_lambda_selection_per_fold(self, noisy_matrix):
        config = ModelConfig(select_lambda=True, lambda_grid=(0.1, 10.0))
        report, _ = cross_validate(noisy_matrix, 3, config, seed=0)
        assert len(report.lambdas) == 3
        assert set(report.lambdas) <= {0.1, 10.0}

    def test_fold_failure_names_fold(self):
        rng = np.random.default_rng(3)
        y = np.array([1, 0] * 30)
        x = rng.normal(size=60)
        X = np.column_stack([x, x])
        with pytest.raises(FoldTrainingError) as info:
            cross_validate(make_matrix(X, y), 3, ModelConfig(lam=0.0), seed=0)
        assert info.value.fold == 0

    def test_too_few_positives(self):
        y = np.array([1, 1] + [0] * 20)
        with pytest.raises(SplitError):
            cross_validate(make_matrix(np.ones((22, 1)), y), 3, ModelConfig(), seed=0)


class TestHoldout:
    def test_trains_on_early_rows(self, noisy_matrix):
        cutoff = T0 + timedelta(hours=200)
        report, scores = holdout_evaluate(noisy_matrix, cutoff, ModelConfig(), seed=0)
        assert report.n == 100
        assert report.split["train_rows"] == 200
        assert report.split["test_rows"] == 100
        assert set(scores["fold"]) == {"test"}
        assert scores["encounter_id"].iloc[0] == "E0200"

    def test_final_model_uses_training_side(self, noisy_matrix):
        cutoff = T0 + timedelta(hours=200)
        model = fit_final_model(noisy_matrix, ModelConfig(), seed=0, cutoff=cutoff)
        assert model.intercept == pytest.approx(noisy_matrix.y[:200].mean())


class TestFeatureMatrix:
    def test_row_mismatch(self):
        with pytest.raises(FeatureDimensionError):
            FeatureMatrix(["a"], np.zeros((2, 1)), np.zeros(2), [T0, T0], ["x"])
