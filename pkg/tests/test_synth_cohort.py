import pytest

from config.settings import DEFAULT_CONFIG, DEFAULT_ICD_CODES
from data.synth_cohort import (
    GeneratorSpec,
    default_embeddings_path,
    generate,
    vocabulary,
    write_synthetic,
)
from utils.cohort_store import load_cohort
from utils.errors import GeneratorSpecError
from utils.label_engine import label_cohort, rule_from_config
from utils.text_features import load_embeddings

VARIABLES = [v["name"] for v in DEFAULT_CONFIG["structured"]["variables"]]


@pytest.fixture(scope="module")
def generated():
    spec = GeneratorSpec(n_encounters=400, prevalence=0.08, seed=21, leak_fraction=0.25, vasopressor_fraction=0.1)
    cohort, truth = generate(spec)
    return spec, cohort, truth


class TestGenerate:
    def test_planted_labels_match_label_engine(self, generated):
        _, cohort, truth = generated
        rule = rule_from_config(DEFAULT_CONFIG["rule"], VARIABLES)
        labels = label_cohort(cohort, rule, DEFAULT_ICD_CODES)
        assert sorted(eid for eid, outcome in labels.items() if outcome.positive) == truth.positive_ids
        for eid in truth.positive_ids:
            assert labels[eid].ssdt == truth.onsets[eid]

    def test_prevalence(self, generated):
        spec, cohort, truth = generated
        assert len(cohort) == 400
        assert abs(len(truth.positive_ids) / len(cohort) - spec.prevalence) <= 0.005

    def test_seeded_audit_events(self, generated):
        spec, _, truth = generated
        assert len(truth.leak_ids) == round(len(truth.positive_ids) * spec.leak_fraction)
        assert set(truth.leak_ids) <= set(truth.positive_ids)
        assert not set(truth.seeded_vasopressors) & set(truth.positive_ids)

    def test_events_within_stays(self, generated):
        _, cohort, _ = generated
        for enc in cohort.encounters:
            times = [e.time for e in enc.notes + enc.measurements + enc.icd_codes + enc.med_events]
            assert all(enc.admit_time <= t <= enc.discharge_time for t in times)
            assert enc.notes[0].time == enc.admit_time

    def test_ids_sorted(self, generated):
        _, cohort, _ = generated
        ids = [e.encounter_id for e in cohort.encounters]
        assert ids == sorted(ids)


class TestWriteSynthetic:
    def test_byte_identical_for_same_seed(self, tmp_path):
        spec = GeneratorSpec(n_encounters=50, prevalence=0.1, seed=3)
        first, _, _ = write_synthetic(spec, tmp_path / "a.jsonl")
        second, _, _ = write_synthetic(spec, tmp_path / "b.jsonl")
        assert first.read_bytes() == second.read_bytes()
        other, _, _ = write_synthetic(GeneratorSpec(n_encounters=50, prevalence=0.1, seed=4), tmp_path / "c.jsonl")
        assert other.read_bytes() != first.read_bytes()

    def test_outputs_pass_validation(self, tmp_path):
        spec = GeneratorSpec(n_encounters=60, prevalence=0.1, seed=8, embedding_dimension=16)
        cohort_path, embeddings_path, _ = write_synthetic(spec, tmp_path / "cohort.jsonl")
        assert embeddings_path == default_embeddings_path(cohort_path)
        assert len(load_cohort(cohort_path)) == 60
        table = load_embeddings(embeddings_path, dimension=16)
        assert list(table.vocab) == vocabulary()


class TestGeneratorSpec:
    @pytest.mark.parametrize(
        "fields",
        [
            {"n_encounters": 0},
            {"prevalence": 0.0},
            {"prevalence": 1.0},
            {"n_encounters": 10, "prevalence": 0.01},
            {"signal_strength": -1.0},
            {"leak_fraction": 1.5},
            {"signal_strength": 10.0},
        ],
    )
    def test_infeasible(self, fields):
        with pytest.raises(GeneratorSpecError):
            generate(GeneratorSpec(**fields))
