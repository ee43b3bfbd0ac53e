"""
Label Engine
Decides per encounter whether and when the severe-sepsis definition is met.

The definition is a declarative threshold rule: within a rolling window,
at least `min_sirs` distinct SIRS-group criteria and `min_organ` distinct
organ-dysfunction criteria must each be satisfied by some measurement.
ICD codes are a second, independent route to a positive label. The
Severe Sepsis Definition Time (SSDT) is the earliest time either route fires.
"""

import logging
import math
import operator
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from utils.cohort_store import Cohort, Encounter
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

COMPARATORS = {
    "<": operator.lt,
    "<=": operator.le,
    "≤": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "≥": operator.ge,
}

GROUPS = ("sirs", "organ_dysfunction")


# =====================================================
# RULE SPEC
# =====================================================

@dataclass(frozen=True)
class Criterion:
    variable: str
    comparator: str
    threshold: float
    group: str

    def is_met(self, value: float) -> bool:
        return COMPARATORS[self.comparator](value, self.threshold)


@dataclass(frozen=True)
class RuleSpec:
    criteria: Tuple[Criterion, ...]
    min_sirs: int
    min_organ: int
    window_hours: float

    @property
    def variables(self) -> set:
        return {c.variable for c in self.criteria}


@dataclass(frozen=True)
class LabelOutcome:
    positive: bool
    ssdt: Optional[datetime] = None
    source: Optional[str] = None  # "rule", "icd" or "both"


def validate_rule_section(section: dict, variable_names: Iterable[str]) -> List[str]:
    """Config-level checks for the `rule` section; returns issues with key paths"""
    issues = []
    known = set(variable_names)

    criteria = section.get("criteria")
    if not isinstance(criteria, list) or not criteria:
        issues.append("rule.criteria: must be a non-empty list")
        criteria = []

    for i, raw in enumerate(criteria):
        where = f"rule.criteria[{i}]"
        if not isinstance(raw, dict):
            issues.append(f"{where}: must be an object")
            continue
        extra = set(raw) - {"variable", "comparator", "threshold", "group"}
        if extra:
            issues.append(f"{where}: unknown key(s) {', '.join(sorted(extra))}")
        variable = raw.get("variable")
        if not isinstance(variable, str) or not variable:
            issues.append(f"{where}.variable: must be a non-empty string")
        elif variable not in known:
            issues.append(f"{where}.variable: '{variable}' is not a configured structured variable")
        if raw.get("comparator") not in COMPARATORS:
            issues.append(f"{where}.comparator: must be one of <, <=, >, >=")
        threshold = raw.get("threshold")
        if isinstance(threshold, bool) or not isinstance(threshold, (int, float)) or not math.isfinite(threshold):
            issues.append(f"{where}.threshold: must be a finite number")
        if raw.get("group") not in GROUPS:
            issues.append(f"{where}.group: must be one of {', '.join(GROUPS)}")

    for key in ("min_sirs", "min_organ"):
        value = section.get(key)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            issues.append(f"rule.{key}: must be an integer >= 1")

    window = section.get("window_hours")
    if isinstance(window, bool) or not isinstance(window, (int, float)) or not window > 0:
        issues.append("rule.window_hours: must be a positive number")

    return issues


def rule_from_config(section: dict, variable_names: Iterable[str]) -> RuleSpec:
    """
    Build a RuleSpec from the `rule` config section.

    Raises:
        ConfigurationError: on any invalid field or a criterion whose
            variable is not in the structured-variable config
    """
    issues = validate_rule_section(section, variable_names)
    if issues:
        raise ConfigurationError(f"invalid rule: {issues[0]}", issues)
    criteria = tuple(
        Criterion(
            variable=raw["variable"],
            comparator=raw["comparator"],
            threshold=float(raw["threshold"]),
            group=raw["group"],
        )
        for raw in section["criteria"]
    )
    return RuleSpec(
        criteria=criteria,
        min_sirs=section["min_sirs"],
        min_organ=section["min_organ"],
        window_hours=float(section["window_hours"]),
    )


# =====================================================
# RULE EVALUATION
# =====================================================

def evaluate_rule(encounter: Encounter, rule: RuleSpec, variables: Optional[Iterable[str]] = None) -> Optional[datetime]:
    """
    Earliest time the rule is satisfied, or None.

    A candidate time t is satisfied when, within (t - window_hours, t],
    enough distinct criteria of each group are met by some measurement.
    The satisfied set only grows when a measurement arrives, so t is always
    the timestamp of the measurement that completes the definition.

    Args:
        encounter: validated encounter
        rule: rule to apply
        variables: configured structured variable names; when given, a
            criterion on an unconfigured variable is a ConfigurationError
    """
    if variables is not None:
        missing = sorted(rule.variables - set(variables))
        if missing:
            raise ConfigurationError(f"rule references unconfigured variable(s): {', '.join(missing)}")

    window = timedelta(hours=rule.window_hours)
    by_variable: Dict[str, List[Tuple[int, Criterion]]] = {}
    for index, criterion in enumerate(rule.criteria):
        by_variable.setdefault(criterion.variable, []).append((index, criterion))

    relevant = sorted(
        (m for m in encounter.measurements if m.variable in by_variable),
        key=lambda m: m.time,
    )
    latest_hit: List[Optional[datetime]] = [None] * len(rule.criteria)

    i = 0
    while i < len(relevant):
        t = relevant[i].time
        # consume every measurement sharing this timestamp before testing t
        while i < len(relevant) and relevant[i].time == t:
            measurement = relevant[i]
            for index, criterion in by_variable[measurement.variable]:
                if criterion.is_met(measurement.value):
                    latest_hit[index] = t
            i += 1

        sirs = organ = 0
        for index, criterion in enumerate(rule.criteria):
            hit = latest_hit[index]
            if hit is not None and hit > t - window:
                if criterion.group == "sirs":
                    sirs += 1
                else:
                    organ += 1
        if sirs >= rule.min_sirs and organ >= rule.min_organ:
            return t

    return None


def normalize_code(code: str) -> str:
    return code.strip().upper().replace(".", "")


def icd_ssdt(encounter: Encounter, code_set: Iterable[str]) -> Optional[datetime]:
    """Earliest assignment time among the encounter's matching ICD codes"""
    wanted = {normalize_code(c) for c in code_set}
    if not wanted:
        raise ConfigurationError("ICD code set is empty")
    times = [c.time for c in encounter.icd_codes if normalize_code(c.code) in wanted]
    return min(times) if times else None


# =====================================================
# COHORT LABELING
# =====================================================

def label_encounter(encounter: Encounter, rule: RuleSpec, code_set: Sequence[str]) -> LabelOutcome:
    rule_time = evaluate_rule(encounter, rule)
    code_time = icd_ssdt(encounter, code_set)

    if rule_time is None and code_time is None:
        return LabelOutcome(positive=False)
    if rule_time is not None and code_time is not None:
        return LabelOutcome(positive=True, ssdt=min(rule_time, code_time), source="both")
    if rule_time is not None:
        return LabelOutcome(positive=True, ssdt=rule_time, source="rule")
    return LabelOutcome(positive=True, ssdt=code_time, source="icd")


def label_cohort(cohort: Cohort, rule: RuleSpec, code_set: Sequence[str]) -> Dict[str, LabelOutcome]:
    """
    Label every encounter in the cohort.

    Returns:
        Dictionary mapping encounter_id to LabelOutcome, in sorted id order
    """
    labels = {
        enc.encounter_id: label_encounter(enc, rule, code_set)
        for enc in sorted(cohort.encounters, key=lambda e: e.encounter_id)
    }

    positives = sum(1 for outcome in labels.values() if outcome.positive)
    by_source = {}
    for outcome in labels.values():
        if outcome.positive:
            by_source[outcome.source] = by_source.get(outcome.source, 0) + 1
    logger.info(
        "Labeled %d encounters: %d positive (%s)",
        len(labels),
        positives,
        ", ".join(f"{k}={v}" for k, v in sorted(by_source.items())) or "none",
    )
    return labels
