import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from utils.errors import MetricError
from utils.metrics import (
    auc,
    capture_row,
    percent,
    round_half_away,
    selection_size,
    top_fraction_capture,
    top_predicted_ids,
)


def brute_force_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_worked_example(self):
        assert auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75

    def test_matches_pairwise_count(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 60))
            labels = rng.integers(0, 2, size=n)
            labels[:2] = [0, 1]
            # coarse scores so ties occur
            scores = rng.integers(0, 8, size=n) / 4.0
            assert auc(scores, labels) == pytest.approx(brute_force_auc(scores, labels), abs=1e-12)

    def test_matches_sklearn(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 2, size=500)
        scores = rng.normal(size=500) + labels
        assert auc(scores, labels) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)

    def test_swapping_labels_complements(self):
        rng = np.random.default_rng(2)
        labels = rng.integers(0, 2, size=100)
        scores = rng.normal(size=100)
        assert auc(scores, labels) + auc(scores, 1 - labels) == pytest.approx(1.0)

    def test_constant_scores(self):
        assert auc([1.0] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.2], [1, 1])


class TestRounding:
    def test_half_away(self):
        assert round_half_away(0.5) == 1
        assert round_half_away(2.5) == 3
        assert round_half_away(-2.5) == -3

    def test_selection_size_is_exact(self):
        assert selection_size(10, 0.05) == 1
        assert selection_size(30, 0.05) == 2
        assert selection_size(1000, 0.1) == 100

    def test_percent(self):
        assert percent(1, 8) == 13
        assert percent(0, 0) == 0


class TestCaptureArithmetic:
    @pytest.mark.parametrize(
        "n, positives, rows",
        [
            (129421, 2527, [(0.01, 1294, 521, 40, 21), (0.05, 6471, 801, 12, 32), (0.10, 12942, 952, 7, 38)]),
            (117768, 2158, [(0.01, 1178, 503, 43, 23), (0.05, 5888, 769, 13, 36), (0.10, 11777, 916, 8, 42)]),
            (68482, 1427, [(0.01, 685, 412, 60, 29), (0.05, 3424, 707, 21, 50), (0.10, 6848, 829, 12, 58)]),
        ],
    )
    def test_horizon_table(self, n, positives, rows):
        for p, k, found, precision_pct, recall_pct in rows:
            row = capture_row(n, p, found, positives)
            assert row.k_selected == k
            assert row.precision_pct == precision_pct
            assert row.recall_pct == recall_pct

    @pytest.mark.parametrize(
        "found, recalls",
        [((115, 217, 247), (27, 51, 58)), ((112, 206, 248), (26, 48, 58)), ((125, 239, 272), (29, 56, 64))],
    )
    def test_modality_table(self, found, recalls):
        for p, k, hits, recall in zip((0.01, 0.05, 0.10), (136, 680, 1360), found, recalls):
            row = capture_row(13603, p, hits, 425)
            assert row.k_selected == k
            assert row.recall_pct == recall

    def test_impossible_counts(self):
        with pytest.raises(MetricError):
            capture_row(100, 0.1, 11, 50)


class TestTopFractionCapture:
    def test_counts_positives_in_top_rows(self):
        scores = np.arange(20, dtype=float)
        labels = np.zeros(20, dtype=int)
        labels[[19, 18, 5]] = 1
        row = top_fraction_capture(scores, labels, 0.1)
        assert row.k_selected == 2
        assert row.positives_found == 2
        assert row.precision == 1.0
        assert row.recall == pytest.approx(2 / 3)

    def test_boundary_ties_break_by_id(self):
        ids = ["c", "a", "b", "d"]
        scores = [1.0, 1.0, 1.0, 0.0]
        assert top_predicted_ids(ids, scores, 0.5) == ["a", "b"]
        row = top_fraction_capture(scores, [1, 0, 0, 1], 0.5, ids=ids)
        assert row.positives_found == 0

    def test_selection_of_nothing(self):
        with pytest.raises(MetricError, match="selects nothing"):
            top_fraction_capture(np.arange(10.0), [0, 1] * 5, 0.01)

    def test_fraction_out_of_range(self):
        with pytest.raises(MetricError):
            top_fraction_capture(np.arange(10.0), [0, 1] * 5, 0.0)
