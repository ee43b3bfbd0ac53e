"""
Cohort Store
Loads, validates and holds immutable encounter records read from JSONL.

One encounter per line:
    {"encounter_id", "admit_time", "discharge_time",
     "notes": [{time, type, text}], "measurements": [{variable, value, time}],
     "icd_codes": [{code, time}], "meds": [{drug, class, time}]}
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import pandas as pd

from utils.errors import CohortValidationError, ConfigurationError

logger = logging.getLogger(__name__)

SUPPORTED_SCHEMA_VERSIONS = {"1"}
TIME_FORMAT = "%Y-%m-%dT%H:%MZ"


# =====================================================
# DOMAIN TYPES
# =====================================================

@dataclass(frozen=True)
class ClinicalNote:
    time: datetime
    note_type: str
    text: str


@dataclass(frozen=True)
class Measurement:
    variable: str
    value: float
    time: datetime


@dataclass(frozen=True)
class CodedDiagnosis:
    code: str
    time: datetime


@dataclass(frozen=True)
class MedicationEvent:
    drug: str
    drug_class: str
    time: datetime


@dataclass(frozen=True)
class Encounter:
    encounter_id: str
    admit_time: datetime
    discharge_time: datetime
    notes: Tuple[ClinicalNote, ...] = ()
    measurements: Tuple[Measurement, ...] = ()
    icd_codes: Tuple[CodedDiagnosis, ...] = ()
    med_events: Tuple[MedicationEvent, ...] = ()


@dataclass(frozen=True)
class LoadIssue:
    line_number: int
    encounter_id: Optional[str]
    message: str

    def __str__(self) -> str:
        where = f"line {self.line_number}"
        if self.encounter_id:
            where += f" (encounter {self.encounter_id})"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class Cohort:
    encounters: Tuple[Encounter, ...]
    source_descriptor: str
    issues: Tuple[LoadIssue, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.encounters)


# =====================================================
# TIMESTAMPS
# =====================================================

def parse_timestamp(value) -> datetime:
    """
    Parse an ISO-8601 timestamp into an aware UTC datetime.

    Naive timestamps are read as UTC; other offsets are converted.
    Sub-minute precision is rejected.
    """
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"timestamp must be a non-empty string, got {value!r}")

    text = value.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"invalid ISO-8601 timestamp {value!r}") from None

    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    else:
        parsed = parsed.astimezone(timezone.utc)

    if parsed.second or parsed.microsecond:
        raise ValueError(f"timestamp {value!r} is not at minute resolution")
    return parsed


def format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime(TIME_FORMAT)


# =====================================================
# RECORD PARSING & VALIDATION
# =====================================================

def _require(record: dict, key: str, where: str):
    if key not in record:
        raise ValueError(f"{where}: missing field '{key}'")
    return record[key]


def _parse_note(raw: dict, index: int) -> ClinicalNote:
    where = f"notes[{index}]"
    text = _require(raw, "text", where)
    if not isinstance(text, str) or not text.strip():
        raise ValueError(f"{where}: text is empty")
    note_type = _require(raw, "type", where)
    if not isinstance(note_type, str) or not note_type:
        raise ValueError(f"{where}: type must be a non-empty string")
    return ClinicalNote(
        time=parse_timestamp(_require(raw, "time", where)),
        note_type=note_type,
        text=text,
    )


def _parse_measurement(raw: dict, index: int) -> Measurement:
    where = f"measurements[{index}]"
    variable = _require(raw, "variable", where)
    if not isinstance(variable, str) or not variable:
        raise ValueError(f"{where}: variable must be a non-empty string")
    value = _require(raw, "value", where)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{where}: value must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{where}: value is not finite")
    return Measurement(variable=variable, value=value, time=parse_timestamp(_require(raw, "time", where)))


def _parse_code(raw: dict, index: int, discharge_time: datetime) -> CodedDiagnosis:
    where = f"icd_codes[{index}]"
    code = _require(raw, "code", where)
    if not isinstance(code, str) or not code.strip():
        raise ValueError(f"{where}: code is empty")
    # Sources without per-code times: the code counts as assigned at discharge
    raw_time = raw.get("time")
    assigned = discharge_time if raw_time is None else parse_timestamp(raw_time)
    return CodedDiagnosis(code=code.strip(), time=assigned)


def _parse_med(raw: dict, index: int) -> MedicationEvent:
    where = f"meds[{index}]"
    drug = _require(raw, "drug", where)
    if not isinstance(drug, str) or not drug.strip():
        raise ValueError(f"{where}: drug is empty")
    drug_class = raw.get("class") or ""
    return MedicationEvent(drug=drug, drug_class=str(drug_class), time=parse_timestamp(_require(raw, "time", where)))


def parse_encounter(record: dict) -> Encounter:
    """
    Build a validated Encounter from one decoded JSON object.

    Raises:
        ValueError: on any schema or invariant violation
    """
    if not isinstance(record, dict):
        raise ValueError("record is not a JSON object")

    encounter_id = _require(record, "encounter_id", "encounter")
    if not isinstance(encounter_id, str) or not encounter_id:
        raise ValueError("encounter_id must be a non-empty string")

    admit = parse_timestamp(_require(record, "admit_time", "encounter"))
    discharge = parse_timestamp(_require(record, "discharge_time", "encounter"))
    if discharge < admit:
        raise ValueError("discharge_time precedes admit_time")

    def _items(key):
        items = record.get(key, [])
        if not isinstance(items, list):
            raise ValueError(f"'{key}' must be an array")
        for index, item in enumerate(items):
            if not isinstance(item, dict):
                raise ValueError(f"{key}[{index}]: must be an object")
        return items

    notes = tuple(_parse_note(raw, i) for i, raw in enumerate(_items("notes")))
    measurements = tuple(_parse_measurement(raw, i) for i, raw in enumerate(_items("measurements")))
    codes = tuple(_parse_code(raw, i, discharge) for i, raw in enumerate(_items("icd_codes")))
    meds = tuple(_parse_med(raw, i) for i, raw in enumerate(_items("meds")))

    for kind, events in (("note", notes), ("measurement", measurements), ("icd code", codes), ("med", meds)):
        for event in events:
            if not admit <= event.time <= discharge:
                raise ValueError(
                    f"{kind} at {format_timestamp(event.time)} lies outside the stay "
                    f"[{format_timestamp(admit)}, {format_timestamp(discharge)}]"
                )

    return Encounter(
        encounter_id=encounter_id,
        admit_time=admit,
        discharge_time=discharge,
        notes=notes,
        measurements=measurements,
        icd_codes=codes,
        med_events=meds,
    )


def encounter_to_record(encounter: Encounter) -> dict:
    """Inverse of parse_encounter, with the bit-exact field names"""
    return {
        "encounter_id": encounter.encounter_id,
        "admit_time": format_timestamp(encounter.admit_time),
        "discharge_time": format_timestamp(encounter.discharge_time),
        "notes": [
            {"time": format_timestamp(n.time), "type": n.note_type, "text": n.text}
            for n in encounter.notes
        ],
        "measurements": [
            {"variable": m.variable, "value": m.value, "time": format_timestamp(m.time)}
            for m in encounter.measurements
        ],
        "icd_codes": [{"code": c.code, "time": format_timestamp(c.time)} for c in encounter.icd_codes],
        "meds": [
            {"drug": m.drug, "class": m.drug_class, "time": format_timestamp(m.time)}
            for m in encounter.med_events
        ],
    }


# =====================================================
# LOAD / WRITE
# =====================================================

def load_cohort(path, schema_version: str = "1", skip_invalid: bool = False) -> Cohort:
    """
    Load and validate a JSONL encounter file.

    Args:
        path: JSONL file, one encounter object per line
        schema_version: record schema version, only "1" exists
        skip_invalid: keep the valid records when some are invalid

    Returns:
        Cohort of the valid encounters, with the skipped records in `issues`

    Raises:
        ConfigurationError: unsupported schema version
        CohortValidationError: invalid records (unless skip_invalid) or an empty result
        OSError: the file cannot be read
    """
    if str(schema_version) not in SUPPORTED_SCHEMA_VERSIONS:
        raise ConfigurationError(f"unsupported schema version {schema_version!r}")

    path = Path(path)
    encounters: List[Encounter] = []
    issues: List[LoadIssue] = []
    seen_ids = set()

    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                issues.append(LoadIssue(line_number, None, f"malformed JSON: {e.msg}"))
                continue

            encounter_id = record.get("encounter_id") if isinstance(record, dict) else None
            try:
                encounter = parse_encounter(record)
            except ValueError as e:
                issues.append(LoadIssue(line_number, encounter_id, str(e)))
                continue

            if encounter.encounter_id in seen_ids:
                issues.append(LoadIssue(line_number, encounter.encounter_id, "duplicate encounter_id"))
                continue
            seen_ids.add(encounter.encounter_id)
            encounters.append(encounter)

    if issues:
        for issue in issues:
            logger.warning("Invalid record - %s", issue)
        if not skip_invalid:
            raise CohortValidationError(
                f"{len(issues)} invalid record(s) in {path}; first: {issues[0]}", issues
            )
        logger.warning("Skipped %d invalid record(s) in %s", len(issues), path)

    if not encounters:
        raise CohortValidationError(f"no valid encounters in {path}", issues)

    logger.info("Loaded %d encounters from %s", len(encounters), path)
    return Cohort(encounters=tuple(encounters), source_descriptor=str(path), issues=tuple(issues))


def write_cohort(path, encounters: Iterable[Encounter]) -> int:
    """Write encounters as JSONL; returns the number of lines written"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for encounter in encounters:
            handle.write(json.dumps(encounter_to_record(encounter), ensure_ascii=False, separators=(",", ":")))
            handle.write("\n")
            count += 1
    return count


# =====================================================
# TRANSFORMS
# =====================================================

def filter_note_types(cohort: Cohort, allowlist) -> Cohort:
    """
    Keep only notes whose type is in the allowlist.

    Encounters are kept even when all their notes go; empty windows are
    dropped later, during dataset assembly.
    """
    allowed = set(allowlist)
    if not allowed:
        raise ConfigurationError("note type allowlist is empty")

    filtered = tuple(
        replace(enc, notes=tuple(n for n in enc.notes if n.note_type in allowed))
        for enc in cohort.encounters
    )
    return replace(cohort, encounters=filtered)


def cohort_summary(cohort: Cohort) -> pd.DataFrame:
    """Per-encounter event counts and stay length"""
    rows = [
        {
            "encounter_id": enc.encounter_id,
            "admit_time": enc.admit_time,
            "stay_hours": (enc.discharge_time - enc.admit_time).total_seconds() / 3600.0,
            "notes": len(enc.notes),
            "measurements": len(enc.measurements),
            "icd_codes": len(enc.icd_codes),
            "meds": len(enc.med_events),
        }
        for enc in cohort.encounters
    ]
    return pd.DataFrame(
        rows, columns=["encounter_id", "admit_time", "stay_hours", "notes", "measurements", "icd_codes", "meds"]
    )
