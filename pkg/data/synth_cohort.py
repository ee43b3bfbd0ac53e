"""
Synthetic cohort generator.

Produces encounters with planted severe-sepsis onsets for end-to-end tests:
- notes are bags of surrogate words; positives use signal words more often
  in the hours before onset
- vitals and labs drift toward SIRS ranges before onset in positives
- at onset, lactate, temperature and heart rate cross the default rule
  thresholds so the rule fires exactly at the planted time

Organ-dysfunction variables are clipped to safe ranges everywhere else, so
negatives never satisfy the default rule.
"""

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from utils.cohort_store import ClinicalNote, Cohort, CodedDiagnosis, Encounter, Measurement, MedicationEvent, write_cohort
from utils.errors import GeneratorSpecError
from utils.metrics import round_half_away
from utils.text_features import EmbeddingTable, write_embeddings

logger = logging.getLogger(__name__)


# =====================================================
# VOCABULARY
# =====================================================

# None of these overlap the default audit terms
SIGNAL_WORDS = [
    "febrile", "tachycardic", "rigors", "chills", "lethargic", "confused",
    "mottled", "hypotensive", "diaphoretic", "tachypneic", "oliguric", "infiltrate",
]

BACKGROUND_WORDS = [
    "patient", "resting", "comfortably", "bed", "alert", "oriented", "denies", "pain",
    "nausea", "tolerating", "diet", "ambulating", "hallway", "assist", "family", "bedside",
    "plan", "continue", "current", "regimen", "monitor", "labs", "morning", "reviewed",
    "stable", "overnight", "events", "none", "vitals", "within", "limits", "lungs",
    "clear", "bilaterally", "abdomen", "soft", "nontender", "extremities", "warm", "edema",
    "trace", "skin", "intact", "wound", "dressing", "changed", "clean", "dry",
    "incision", "healing", "well", "physical", "therapy", "evaluation", "recommend", "discharge",
    "home", "services", "social", "work", "consulted", "insulin", "sliding", "scale",
    "glucose", "checks", "fingerstick", "heparin", "subcutaneous", "prophylaxis", "iv", "fluids",
    "saline", "lock", "foley", "removed", "voiding", "spontaneously", "bowel", "movement",
    "appetite", "improved", "sleeping", "chest", "xray", "ordered", "cardiology", "following",
    "echo", "scheduled", "medications", "reconciled", "allergies", "reviewed", "code", "status",
    "full", "daughter", "updated", "questions", "answered", "nurse", "rounds", "shift",
    "report", "given", "oxygen", "nasal", "cannula", "weaned", "room", "air",
]

LEAK_TEXT = "history of severe sepsis with septic shock requiring pressors"

OTHER_ICD_CODES = ["J18.9", "N39.0", "I50.9", "E11.9", "I10", "K52.9", "M79.6"]
SEVERE_SEPSIS_CODE = "R65.20"
NOTE_TYPES = ["progress", "nursing", "radiology"]


def vocabulary() -> List[str]:
    """Every word the generator can emit, in a fixed order"""
    words = list(dict.fromkeys(BACKGROUND_WORDS + SIGNAL_WORDS + LEAK_TEXT.split()))
    return words


# =====================================================
# MEASUREMENT SCHEDULES
# =====================================================

# name: (baseline mean, baseline sd, pre-onset shift at full strength, clip range or None)
VITALS = {
    "temperature": (37.0, 0.35, 0.6, None),
    "heart_rate": (80.0, 9.0, 14.0, None),
    "resp_rate": (16.0, 2.0, 4.0, None),
    "sbp": (122.0, 12.0, -10.0, (92.0, 170.0)),
    "map": (88.0, 8.0, -7.0, None),
    "spo2": (97.0, 1.2, -1.5, (85.0, 100.0)),
}
LABS = {
    "wbc": (8.0, 1.8, 4.0, None),
    "lactate": (1.1, 0.25, 0.4, (0.5, 1.9)),
    "creatinine": (0.9, 0.18, 0.2, (0.5, 1.9)),
    "platelets": (250.0, 50.0, -30.0, (110.0, 450.0)),
    "bilirubin": (0.6, 0.2, 0.2, (0.1, 3.0)),
    "glucose": (110.0, 18.0, 15.0, (60.0, 300.0)),
}
VITALS_EVERY_MINUTES = 6 * 60
LABS_EVERY_MINUTES = 24 * 60

# Onset excursions: (variable, value, minutes before onset)
ONSET_EXCURSIONS = [("temperature", 38.9, 120), ("heart_rate", 115.0, 60), ("lactate", 3.5, 0)]


# =====================================================
# SPEC / GROUND TRUTH
# =====================================================

@dataclass(frozen=True)
class GeneratorSpec:
    n_encounters: int = 1000
    prevalence: float = 0.025
    stay_median_hours: float = 72.0
    stay_sigma: float = 0.6
    min_stay_hours: float = 12.0
    max_stay_hours: float = 720.0
    notes_per_day: float = 3.5
    tokens_per_note: int = 40
    oov_rate: float = 0.02
    signal_strength: float = 1.0
    text_strength: float = 1.0
    structured_strength: float = 1.0
    signal_window_hours: float = 48.0
    baseline_signal_rate: float = 0.005
    signal_rate: float = 0.15
    leak_fraction: float = 0.0
    vasopressor_fraction: float = 0.0
    embedding_dimension: int = 300
    start: str = "2012-01-01"
    years: int = 5
    seed: int = 0

    def validate(self) -> None:
        """
        Raises:
            GeneratorSpecError: listing the first infeasible field
        """
        checks = [
            (self.n_encounters >= 1, "n_encounters must be >= 1"),
            (0 < self.prevalence < 1, "prevalence must be in (0, 1)"),
            (self.signal_strength >= 0, "signal_strength must be >= 0"),
            (self.text_strength >= 0 and self.structured_strength >= 0, "modality strengths must be >= 0"),
            (self.min_stay_hours * 60 >= VITALS_EVERY_MINUTES, "min_stay_hours is shorter than the vitals schedule"),
            (self.min_stay_hours <= self.stay_median_hours <= self.max_stay_hours, "stay median must lie in [min, max]"),
            (self.stay_sigma >= 0, "stay_sigma must be >= 0"),
            (self.notes_per_day > 0, "notes_per_day must be > 0"),
            (self.tokens_per_note >= 1, "tokens_per_note must be >= 1"),
            (0 <= self.oov_rate < 1, "oov_rate must be in [0, 1)"),
            (self.signal_window_hours > 0, "signal_window_hours must be > 0"),
            (0 <= self.leak_fraction <= 1, "leak_fraction must be in [0, 1]"),
            (0 <= self.vasopressor_fraction <= 1, "vasopressor_fraction must be in [0, 1]"),
            (self.embedding_dimension >= 1, "embedding_dimension must be >= 1"),
            (self.years >= 1, "years must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise GeneratorSpecError(message)

        max_signal = self.baseline_signal_rate + self.signal_rate * self.signal_strength * self.text_strength
        if not 0 <= self.baseline_signal_rate or max_signal + self.oov_rate > 1:
            raise GeneratorSpecError("signal word rate exceeds 1 at this signal strength")

        positives = self.positive_count
        if positives == 0 or positives == self.n_encounters:
            raise GeneratorSpecError(
                f"prevalence {self.prevalence} of {self.n_encounters} encounters leaves a single class"
            )

    @property
    def positive_count(self) -> int:
        return round_half_away(self.n_encounters * self.prevalence)


@dataclass(frozen=True)
class GroundTruth:
    labels: Dict[str, bool]
    onsets: Dict[str, datetime]
    leak_ids: Tuple[str, ...] = ()
    seeded_vasopressors: Dict[str, datetime] = field(default_factory=dict)
    treatment_vasopressors: Dict[str, datetime] = field(default_factory=dict)

    @property
    def positive_ids(self) -> List[str]:
        return sorted(eid for eid, positive in self.labels.items() if positive)


# =====================================================
# GENERATION
# =====================================================

def _minute(t0: datetime, minutes: int) -> datetime:
    return t0 + timedelta(minutes=int(minutes))


class _EncounterBuilder:
    """Draws one encounter at a time from the shared generator"""

    def __init__(self, spec: GeneratorSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.background = np.array(BACKGROUND_WORDS)
        self.signal = np.array(SIGNAL_WORDS)
        self.text_lift = spec.signal_rate * spec.signal_strength * spec.text_strength
        self.shift_scale = spec.signal_strength * spec.structured_strength

    def _in_signal_window(self, offset: int, onset: Optional[int]) -> bool:
        if onset is None:
            return False
        return onset - self.spec.signal_window_hours * 60 <= offset <= onset

    def note_text(self, offset: int, onset: Optional[int]) -> str:
        spec = self.spec
        n = max(1, int(self.rng.poisson(spec.tokens_per_note)))
        p_signal = spec.baseline_signal_rate
        if self._in_signal_window(offset, onset):
            p_signal += self.text_lift

        draws = self.rng.random(n)
        background = self.rng.integers(0, len(self.background), size=n)
        signal = self.rng.integers(0, len(self.signal), size=n)
        numbers = self.rng.integers(1, 200, size=n)

        words = []
        for i in range(n):
            if draws[i] < p_signal:
                words.append(self.signal[signal[i]])
            elif draws[i] < p_signal + spec.oov_rate:
                words.append(str(numbers[i]))
            else:
                words.append(self.background[background[i]])
        return " ".join(words)

    def notes(self, admit: datetime, stay: int, onset: Optional[int], leak: bool) -> List[ClinicalNote]:
        expected = self.spec.notes_per_day * stay / (24 * 60)
        count = max(1, int(self.rng.poisson(expected)))
        offsets = np.sort(self.rng.integers(0, stay + 1, size=count))
        offsets[0] = 0
        types = self.rng.integers(0, len(NOTE_TYPES), size=count)

        notes = []
        for i, offset in enumerate(offsets):
            note_type = "history_and_physical" if i == 0 else NOTE_TYPES[types[i]]
            notes.append(ClinicalNote(_minute(admit, offset), note_type, self.note_text(int(offset), onset)))
        if leak:
            notes.insert(0, ClinicalNote(admit, "history_and_physical", LEAK_TEXT))
        return notes

    def measurements(self, admit: datetime, stay: int, onset: Optional[int]) -> List[Measurement]:
        readings = []
        for schedule, every in ((VITALS, VITALS_EVERY_MINUTES), (LABS, LABS_EVERY_MINUTES)):
            for offset in range(0, stay + 1, every):
                lifted = self._in_signal_window(offset, onset)
                noise = self.rng.standard_normal(len(schedule))
                for (name, (mean, sd, shift, clip)), z in zip(schedule.items(), noise):
                    value = mean + sd * z
                    if lifted:
                        value += shift * self.shift_scale
                    if clip is not None:
                        value = min(max(value, clip[0]), clip[1])
                    readings.append(Measurement(name, round(float(value), 1), _minute(admit, offset)))

        if onset is not None:
            for name, value, before in ONSET_EXCURSIONS:
                readings.append(Measurement(name, value, _minute(admit, max(0, onset - before))))
        readings.sort(key=lambda m: m.time)
        return readings


def generate(spec: GeneratorSpec) -> Tuple[Cohort, GroundTruth]:
    """
    Generate a cohort from one seeded stream.

    Returns:
        (cohort in encounter_id order, ground truth)

    Raises:
        GeneratorSpecError: infeasible spec
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    builder = _EncounterBuilder(spec, rng)

    n = spec.n_encounters
    n_pos = spec.positive_count
    positive = np.zeros(n, dtype=bool)
    positive[rng.permutation(n)[:n_pos]] = True

    leak_count = round_half_away(n_pos * spec.leak_fraction)
    leak_index = set(rng.permutation(np.flatnonzero(positive))[:leak_count].tolist())
    negatives = np.flatnonzero(~positive)
    vaso_count = round_half_away(len(negatives) * spec.vasopressor_fraction)
    vaso_index = set(rng.permutation(negatives)[:vaso_count].tolist())

    start = datetime.fromisoformat(spec.start).replace(tzinfo=timezone.utc)
    period_minutes = int(365 * spec.years * 24 * 60)
    width = max(6, len(str(n)))

    encounters = []
    labels, onsets = {}, {}
    leak_ids, seeded, treatment = [], {}, {}

    for i in range(n):
        encounter_id = f"E{i:0{width}d}"
        admit = _minute(start, rng.integers(0, period_minutes))
        hours = spec.stay_median_hours * math.exp(spec.stay_sigma * rng.standard_normal())
        hours = min(max(hours, spec.min_stay_hours), spec.max_stay_hours)
        stay = int(round(hours * 60))
        discharge = _minute(admit, stay)

        onset = int(rng.integers(0, stay + 1)) if positive[i] else None
        notes = builder.notes(admit, stay, onset, leak=i in leak_index)
        measurements = builder.measurements(admit, stay, onset)

        meds: List[MedicationEvent] = []
        if onset is not None and onset + 60 <= stay:
            meds.append(MedicationEvent("norepinephrine", "vasopressor", _minute(admit, onset + 60)))
            treatment[encounter_id] = meds[-1].time
        if i in vaso_index:
            given = _minute(admit, rng.integers(0, stay + 1))
            meds.append(MedicationEvent("norepinephrine", "vasopressor", given))
            seeded[encounter_id] = given
        meds.sort(key=lambda m: m.time)

        codes = [CodedDiagnosis(OTHER_ICD_CODES[rng.integers(0, len(OTHER_ICD_CODES))], discharge)]
        if onset is not None and rng.random() < 0.5:
            codes.append(CodedDiagnosis(SEVERE_SEPSIS_CODE, discharge))

        encounters.append(
            Encounter(
                encounter_id=encounter_id,
                admit_time=admit,
                discharge_time=discharge,
                notes=tuple(notes),
                measurements=tuple(measurements),
                icd_codes=tuple(codes),
                med_events=tuple(meds),
            )
        )
        labels[encounter_id] = bool(positive[i])
        if onset is not None:
            onsets[encounter_id] = _minute(admit, onset)
        if i in leak_index:
            leak_ids.append(encounter_id)

    logger.info(
        "Generated %d encounters (%d positive, %d leak notes, %d seeded vasopressors), seed %d",
        n,
        n_pos,
        len(leak_ids),
        len(seeded),
        spec.seed,
    )
    cohort = Cohort(encounters=tuple(encounters), source_descriptor=f"synthetic(seed={spec.seed}, n={n})")
    truth = GroundTruth(
        labels=labels,
        onsets=onsets,
        leak_ids=tuple(leak_ids),
        seeded_vasopressors=seeded,
        treatment_vasopressors=treatment,
    )
    return cohort, truth


def generate_embeddings(spec: GeneratorSpec) -> EmbeddingTable:
    """Random vectors for the generator vocabulary, seeded independently of the cohort stream"""
    rng = np.random.default_rng([spec.seed, 1])
    words = vocabulary()
    vectors = rng.standard_normal((len(words), spec.embedding_dimension)) / math.sqrt(spec.embedding_dimension)
    return EmbeddingTable.from_entries({w: vectors[i] for i, w in enumerate(words)}, spec.embedding_dimension)


def default_embeddings_path(out_path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(f"{out_path.stem}.vectors.txt")


def write_synthetic(spec: GeneratorSpec, out_path, embeddings_out=None) -> Tuple[Path, Path, GroundTruth]:
    """Generate and write the JSONL cohort plus its GloVe-format embedding table"""
    cohort, truth = generate(spec)
    out_path = Path(out_path)
    embeddings_out = Path(embeddings_out) if embeddings_out else default_embeddings_path(out_path)
    write_cohort(out_path, cohort.encounters)
    write_embeddings(generate_embeddings(spec), embeddings_out)
    logger.info("Wrote %s and %s", out_path, embeddings_out)
    return out_path, embeddings_out, truth
