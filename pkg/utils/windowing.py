"""
Windowing
Builds leakage-safe Modeling Data Windows (MDWs) and assembles modeling
datasets.

Positives are anchored at their SSDT, negatives at a random minute of the
stay. An MDW keeps only the events at or before anchor - horizon.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from utils.cohort_store import ClinicalNote, Cohort, Encounter, Measurement, MedicationEvent
from utils.errors import ConfigurationError, DatasetEmptyError
from utils.label_engine import LabelOutcome

logger = logging.getLogger(__name__)

MODALITIES = ("text", "structured", "both")


# =====================================================
# TYPES
# =====================================================

@dataclass(frozen=True)
class Anchor:
    time: datetime
    kind: str  # "ssdt" or "sampled"


@dataclass(frozen=True)
class ModelingDataWindow:
    encounter_id: str
    horizon_hours: float
    anchor: Anchor
    notes: Tuple[ClinicalNote, ...]
    measurements: Tuple[Measurement, ...]
    med_events: Tuple[MedicationEvent, ...]

    @property
    def cutoff(self) -> datetime:
        return self.anchor.time - timedelta(hours=self.horizon_hours)


@dataclass(frozen=True)
class DatasetRow:
    encounter_id: str
    admit_time: datetime
    mdw: ModelingDataWindow
    label: int


@dataclass(frozen=True)
class ModelingDataset:
    rows: Tuple[DatasetRow, ...]
    horizon_hours: float
    modality_requirement: str
    stats: Dict[str, int] = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def encounter_ids(self):
        return [row.encounter_id for row in self.rows]

    @property
    def labels(self) -> np.ndarray:
        return np.array([row.label for row in self.rows], dtype=int)


# =====================================================
# ANCHORS
# =====================================================

def _encounter_rng(seed: int, encounter_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{int(seed)}:{encounter_id}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def sample_negative_anchor(encounter: Encounter, seed: int) -> Anchor:
    """
    Uniform random minute in [admit_time, discharge_time].

    Deterministic in (seed, encounter_id), independent of cohort order.
    A zero-length stay anchors at admit_time.
    """
    span_minutes = int((encounter.discharge_time - encounter.admit_time).total_seconds() // 60)
    if span_minutes <= 0:
        return Anchor(time=encounter.admit_time, kind="sampled")
    offset = int(_encounter_rng(seed, encounter.encounter_id).integers(0, span_minutes + 1))
    return Anchor(time=encounter.admit_time + timedelta(minutes=offset), kind="sampled")


# =====================================================
# MODELING DATA WINDOW
# =====================================================

def build_mdw(encounter: Encounter, anchor: Anchor, horizon_hours: float) -> ModelingDataWindow:
    """Keep the events with time <= anchor - horizon (boundary inclusive)"""
    if horizon_hours < 0:
        raise ConfigurationError(f"horizon must be >= 0 hours, got {horizon_hours}")
    cutoff = anchor.time - timedelta(hours=horizon_hours)
    return ModelingDataWindow(
        encounter_id=encounter.encounter_id,
        horizon_hours=float(horizon_hours),
        anchor=anchor,
        notes=tuple(n for n in encounter.notes if n.time <= cutoff),
        measurements=tuple(m for m in encounter.measurements if m.time <= cutoff),
        med_events=tuple(m for m in encounter.med_events if m.time <= cutoff),
    )


def has_text(mdw: ModelingDataWindow) -> bool:
    return len(mdw.notes) > 0


def has_structured(mdw: ModelingDataWindow, variables: Optional[set] = None) -> bool:
    if variables is None:
        return len(mdw.measurements) > 0
    return any(m.variable in variables for m in mdw.measurements)


# =====================================================
# DATASET ASSEMBLY
# =====================================================

def assemble_dataset(
    cohort: Cohort,
    labels: Dict[str, LabelOutcome],
    horizon_hours: float,
    modality_requirement: str,
    seed: int,
    structured_variables: Optional[Iterable[str]] = None,
) -> ModelingDataset:
    """
    One row per encounter, sorted by encounter_id.

    Rows whose required modality is empty in the MDW are dropped and
    counted in `stats`.

    Raises:
        DatasetEmptyError: when no row survives
    """
    if modality_requirement not in MODALITIES:
        raise ConfigurationError(f"unknown modality {modality_requirement!r}")
    variables = set(structured_variables) if structured_variables is not None else None

    stats = {
        "encounters": 0,
        "positives_labeled": 0,
        "dropped_empty_text": 0,
        "dropped_empty_structured": 0,
        "dropped_positive": 0,
        "dropped_negative": 0,
        "rows": 0,
        "positives": 0,
        "negatives": 0,
    }

    rows = []
    for encounter in sorted(cohort.encounters, key=lambda e: e.encounter_id):
        stats["encounters"] += 1
        outcome = labels.get(encounter.encounter_id)
        if outcome is None:
            raise ConfigurationError(f"no label for encounter {encounter.encounter_id}")

        if outcome.positive:
            stats["positives_labeled"] += 1
            anchor = Anchor(time=outcome.ssdt, kind="ssdt")
        else:
            anchor = sample_negative_anchor(encounter, seed)

        mdw = build_mdw(encounter, anchor, horizon_hours)

        missing_text = modality_requirement in ("text", "both") and not has_text(mdw)
        missing_structured = modality_requirement in ("structured", "both") and not has_structured(mdw, variables)
        if missing_text or missing_structured:
            if missing_text:
                stats["dropped_empty_text"] += 1
            if missing_structured:
                stats["dropped_empty_structured"] += 1
            stats["dropped_positive" if outcome.positive else "dropped_negative"] += 1
            continue

        label = 1 if outcome.positive else 0
        rows.append(DatasetRow(encounter.encounter_id, encounter.admit_time, mdw, label))
        stats["positives" if label else "negatives"] += 1

    stats["rows"] = len(rows)
    logger.info(
        "Assembled %g-hour %s dataset: %d rows (%d positive), dropped %d positive / %d negative",
        horizon_hours,
        modality_requirement,
        stats["rows"],
        stats["positives"],
        stats["dropped_positive"],
        stats["dropped_negative"],
    )

    if not rows:
        raise DatasetEmptyError(
            f"no encounters with a non-empty {modality_requirement} modeling window "
            f"at a {horizon_hours:g}-hour horizon"
        )

    return ModelingDataset(
        rows=tuple(rows),
        horizon_hours=float(horizon_hours),
        modality_requirement=modality_requirement,
        stats=stats,
    )


def restrict_rows(dataset: ModelingDataset, encounter_ids: Iterable[str]) -> ModelingDataset:
    """Keep only the rows of the given encounters (fixed-cohort experiments)"""
    keep = set(encounter_ids)
    rows = tuple(row for row in dataset.rows if row.encounter_id in keep)
    if not rows:
        raise DatasetEmptyError("no rows left after restricting to the fixed cohort")
    stats = dict(dataset.stats)
    stats["rows"] = len(rows)
    stats["positives"] = sum(row.label for row in rows)
    stats["negatives"] = len(rows) - stats["positives"]
    stats["dropped_fixed_cohort"] = len(dataset.rows) - len(rows)
    return ModelingDataset(rows, dataset.horizon_hours, dataset.modality_requirement, stats)
