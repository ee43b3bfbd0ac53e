from datetime import timedelta

import numpy as np
import pytest

from builders import T0, encounter
from utils.cohort_store import Cohort
from utils.errors import SplitError
from utils.label_engine import LabelOutcome
from utils.splits import stratified_fold_indices, stratified_folds, temporal_mask, temporal_split
from utils.windowing import assemble_dataset


def fold_counts(folds, labels, k):
    labels = np.asarray(labels)
    return [(int(((folds == f) & (labels == 1)).sum()), int((folds == f).sum())) for f in range(k)]


class TestStratifiedFolds:
    def test_low_prevalence_is_balanced(self):
        labels = np.zeros(1000, dtype=int)
        labels[np.random.default_rng(0).choice(1000, 21, replace=False)] = 1
        folds = stratified_fold_indices(labels, 3, seed=5)

        counts = fold_counts(folds, labels, 3)
        assert sum(total for _, total in counts) == 1000
        assert {pos for pos, _ in counts} == {7}
        totals = [total for _, total in counts]
        assert max(totals) - min(totals) <= 1
        assert set(np.unique(folds)) == {0, 1, 2}

    def test_six_and_six(self):
        labels = [1] * 6 + [0] * 6
        assert fold_counts(stratified_fold_indices(labels, 3, seed=1), labels, 3) == [(2, 4)] * 3

    def test_seven_positives(self):
        labels = [1] * 7 + [0] * 7
        counts = fold_counts(stratified_fold_indices(labels, 3, seed=2), labels, 3)
        assert sorted(pos for pos, _ in counts) == [2, 2, 3]
        totals = [total for _, total in counts]
        assert max(totals) - min(totals) <= 1

    def test_seeded(self):
        labels = [1] * 10 + [0] * 40
        a = stratified_fold_indices(labels, 4, seed=9)
        np.testing.assert_array_equal(a, stratified_fold_indices(labels, 4, seed=9))
        assert not np.array_equal(a, stratified_fold_indices(labels, 4, seed=10))

    def test_too_few_positives(self):
        with pytest.raises(SplitError, match="at least 3 positives"):
            stratified_fold_indices([1, 1] + [0] * 10, 3, seed=0)

    def test_single_fold(self):
        with pytest.raises(SplitError):
            stratified_fold_indices([1, 0, 1, 0], 1, seed=0)


class TestTemporalMask:
    def test_cutoff_row_goes_to_test(self):
        admits = [T0 + timedelta(days=d) for d in range(4)]
        mask = temporal_mask(admits, T0 + timedelta(days=2))
        assert mask.tolist() == [True, True, False, False]

    def test_empty_side(self):
        admits = [T0, T0 + timedelta(days=1)]
        with pytest.raises(SplitError, match="empty training side"):
            temporal_mask(admits, T0)
        with pytest.raises(SplitError, match="empty test side"):
            temporal_mask(admits, T0 + timedelta(days=5))


class TestDatasetSplits:
    @pytest.fixture
    def dataset(self):
        encounters = [
            encounter(f"E{i:02d}", notes=[(0, "x")], admit=T0 + timedelta(days=i)) for i in range(12)
        ]
        labels = {
            e.encounter_id: LabelOutcome(True, e.admit_time + timedelta(hours=30), "rule")
            if i % 3 == 0
            else LabelOutcome(False)
            for i, e in enumerate(encounters)
        }
        return assemble_dataset(Cohort(tuple(encounters), "test"), labels, 0, "text", seed=0)

    def test_fold_assignment_by_id(self, dataset):
        assignment = stratified_folds(dataset, 2, seed=3)
        assert sorted(assignment.folds) == dataset.encounter_ids
        members = assignment.members(0) + assignment.members(1)
        assert sorted(members) == dataset.encounter_ids

    def test_temporal_split_rows(self, dataset):
        train, test = temporal_split(dataset, T0 + timedelta(days=8))
        assert [r.encounter_id for r in train] == [f"E{i:02d}" for i in range(8)]
        assert [r.encounter_id for r in test] == ["E08", "E09", "E10", "E11"]
        with pytest.raises(SplitError):
            temporal_split(dataset, T0)
