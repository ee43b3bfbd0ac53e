from datetime import timedelta

import pytest

from builders import T0, at, encounter
from config.settings import DEFAULT_CRITERIA, DEFAULT_ICD_CODES, DEFAULT_VARIABLES
from data.synth_cohort import GeneratorSpec, generate
from utils.cohort_store import Cohort
from utils.errors import ConfigurationError, DatasetEmptyError
from utils.label_engine import LabelOutcome, label_cohort, rule_from_config
from utils.windowing import (
    Anchor,
    assemble_dataset,
    build_mdw,
    has_structured,
    has_text,
    restrict_rows,
    sample_negative_anchor,
)

VARIABLES = [v["name"] for v in DEFAULT_VARIABLES]


class TestSampleNegativeAnchor:
    def test_within_stay_and_on_the_minute(self):
        enc = encounter(stay_hours=50)
        for seed in range(20):
            anchor = sample_negative_anchor(enc, seed)
            assert enc.admit_time <= anchor.time <= enc.discharge_time
            assert anchor.time.second == 0
            assert anchor.kind == "sampled"

    def test_deterministic_and_order_independent(self):
        a, b = encounter("A", stay_hours=80), encounter("B", stay_hours=80)
        first = [sample_negative_anchor(e, 42) for e in (a, b)]
        second = [sample_negative_anchor(e, 42) for e in (b, a)][::-1]
        assert first == second

    def test_zero_length_stay(self):
        assert sample_negative_anchor(encounter(stay_hours=0), 1).time == T0

    def test_draws_average_to_mid_stay(self):
        enc = encounter(stay_hours=100)
        hours = [
            (sample_negative_anchor(enc, seed).time - enc.admit_time).total_seconds() / 3600 for seed in range(10_000)
        ]
        assert sum(hours) / len(hours) == pytest.approx(50.0, abs=2.0)


class TestBuildMdw:
    def test_cutoff_is_inclusive(self):
        enc = encounter(notes=[(10, "kept"), (10.0167, "dropped")], measurements=[("wbc", 9, 10), ("wbc", 9, 11)])
        mdw = build_mdw(enc, Anchor(at(34), "ssdt"), 24)
        assert [n.text for n in mdw.notes] == ["kept"]
        assert len(mdw.measurements) == 1
        assert mdw.cutoff == at(10)

    def test_zero_horizon_keeps_everything_up_to_anchor(self):
        enc = encounter(
            notes=[(1, "a"), (12, "b"), (13, "c")],
            measurements=[("wbc", 9, 12), ("wbc", 9, 12.5)],
            meds=[("norepinephrine", "vasopressor", 12)],
        )
        mdw = build_mdw(enc, Anchor(at(12), "ssdt"), 0)
        assert [n.text for n in mdw.notes] == ["a", "b"]
        assert [m.time for m in mdw.measurements] == [at(12)]
        assert len(mdw.med_events) == 1

    def test_anchor_before_horizon_gives_empty_window(self):
        enc = encounter(notes=[(0, "admission note")])
        mdw = build_mdw(enc, Anchor(at(2), "ssdt"), 4)
        assert not has_text(mdw)

    def test_med_events_follow_cutoff(self):
        enc = encounter(meds=[("norepinephrine", "vasopressor", 5), ("norepinephrine", "vasopressor", 30)])
        mdw = build_mdw(enc, Anchor(at(30), "ssdt"), 24)
        assert len(mdw.med_events) == 1

    def test_negative_horizon(self):
        with pytest.raises(ConfigurationError):
            build_mdw(encounter(), Anchor(T0, "ssdt"), -1)

    def test_has_structured_respects_variables(self):
        enc = encounter(measurements=[("troponin", 0.1, 1)])
        mdw = build_mdw(enc, Anchor(at(30), "ssdt"), 24)
        assert has_structured(mdw)
        assert not has_structured(mdw, {"wbc"})


class TestAssembleDataset:
    def labels_for(self, cohort, positive_at=None):
        positive_at = positive_at or {}
        return {
            e.encounter_id: LabelOutcome(True, positive_at[e.encounter_id], "rule")
            if e.encounter_id in positive_at
            else LabelOutcome(False)
            for e in cohort.encounters
        }

    def test_positive_anchor_is_ssdt(self):
        cohort = Cohort((encounter("P", notes=[(1, "a"), (20, "b")]),), "test")
        dataset = assemble_dataset(cohort, self.labels_for(cohort, {"P": at(30)}), 24, "text", seed=0)
        row = dataset.rows[0]
        assert row.label == 1
        assert row.mdw.anchor == Anchor(at(30), "ssdt")
        assert [n.text for n in row.mdw.notes] == ["a"]

    def test_modality_drops_are_counted(self):
        cohort = Cohort(
            (
                encounter("A", notes=[(0, "a")], measurements=[("wbc", 9, 0)]),
                encounter("B", measurements=[("wbc", 9, 0)]),
                encounter("C", notes=[(0, "c")]),
            ),
            "test",
        )
        labels = self.labels_for(cohort, {"A": at(48), "B": at(48), "C": at(48)})
        dataset = assemble_dataset(cohort, labels, 24, "both", seed=0, structured_variables=VARIABLES)
        assert dataset.encounter_ids == ["A"]
        assert dataset.stats["dropped_empty_text"] == 1
        assert dataset.stats["dropped_empty_structured"] == 1
        assert dataset.stats["dropped_positive"] == 2

    def test_same_seed_reassembles_identically(self):
        cohort = Cohort(
            tuple(encounter(f"N{i}", notes=[(0, "x")], measurements=[("wbc", 9, 0)]) for i in range(30)), "test"
        )
        labels = self.labels_for(cohort, {"N0": at(60)})
        first = assemble_dataset(cohort, labels, 0, "both", seed=8, structured_variables=VARIABLES)
        second = assemble_dataset(cohort, labels, 0, "both", seed=8, structured_variables=VARIABLES)
        assert first == second
        assert first.stats == second.stats
        assert [r.mdw.anchor for r in first.rows] == [r.mdw.anchor for r in second.rows]

    def test_rows_sorted_by_id(self):
        cohort = Cohort(tuple(encounter(eid, notes=[(0, "x")]) for eid in ("C", "A", "B")), "test")
        labels = self.labels_for(cohort, {eid: at(60) for eid in ("A", "B", "C")})
        assert assemble_dataset(cohort, labels, 4, "text", seed=0).encounter_ids == ["A", "B", "C"]

    def test_empty_dataset(self):
        cohort = Cohort((encounter("A", notes=[(0, "x")]),), "test")
        with pytest.raises(DatasetEmptyError):
            assemble_dataset(cohort, self.labels_for(cohort), 24, "structured", seed=0)

    def test_restrict_rows(self):
        cohort = Cohort(tuple(encounter(eid, notes=[(0, "x")]) for eid in ("A", "B")), "test")
        labels = self.labels_for(cohort, {"A": at(60), "B": at(60)})
        dataset = restrict_rows(assemble_dataset(cohort, labels, 4, "text", seed=0), ["B"])
        assert dataset.encounter_ids == ["B"]
        assert dataset.stats["dropped_fixed_cohort"] == 1


class TestWindowingSafety:
    @pytest.fixture(scope="class")
    def generated(self):
        cohort, _ = generate(GeneratorSpec(n_encounters=1000, prevalence=0.05, seed=3))
        rule = rule_from_config(
            {"criteria": DEFAULT_CRITERIA, "min_sirs": 2, "min_organ": 1, "window_hours": 6}, VARIABLES
        )
        return cohort, label_cohort(cohort, rule, DEFAULT_ICD_CODES)

    def test_no_event_after_cutoff_and_windows_nest(self, generated):
        cohort, labels = generated
        datasets = {}
        for horizon in (4, 8, 24):
            try:
                datasets[horizon] = assemble_dataset(cohort, labels, horizon, "text", seed=9)
            except DatasetEmptyError:
                datasets[horizon] = None

        sizes = []
        for horizon in (4, 8, 24):
            dataset = datasets[horizon]
            sizes.append(len(dataset) if dataset else 0)
            for row in dataset.rows if dataset else ():
                cutoff = row.mdw.anchor.time - timedelta(hours=horizon)
                events = row.mdw.notes + row.mdw.measurements + row.mdw.med_events
                assert all(e.time <= cutoff for e in events)

        assert sizes[0] >= sizes[1] >= sizes[2]

        by_horizon = {h: {r.encounter_id: r.mdw for r in datasets[h].rows} for h in (4, 8, 24)}
        for eid, mdw24 in by_horizon[24].items():
            mdw8, mdw4 = by_horizon[8][eid], by_horizon[4][eid]
            assert set(mdw24.notes) <= set(mdw8.notes) <= set(mdw4.notes)
            assert set(mdw24.measurements) <= set(mdw8.measurements) <= set(mdw4.measurements)
