"""
Structured Features
Rolls up the timestamped measurements of a Modeling Data Window into a
fixed-length vector: per variable mean, sample std and counts of abnormal
high, abnormal low and normal readings.

Variables with no readings are encoded as masked zeros.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ConfigurationError
from utils.windowing import ModelingDataWindow

logger = logging.getLogger(__name__)

STAT_ORDER = ("mean", "std", "count_high", "count_low", "count_normal")


# =====================================================
# RECIPE
# =====================================================

@dataclass(frozen=True)
class VariableSpec:
    variable: str
    normal_low: float
    normal_high: float
    stats: Tuple[str, ...] = STAT_ORDER


@dataclass(frozen=True)
class StructuredFeature:
    vector: np.ndarray
    present_mask: np.ndarray
    ignored_measurements: int = 0


def validate_recipe_section(section: dict) -> List[str]:
    """Config-level checks for the `structured` section; returns issues with key paths"""
    issues = []
    variables = section.get("variables")
    if not isinstance(variables, list) or not variables:
        return ["structured.variables: must be a non-empty list"]

    seen = set()
    for i, raw in enumerate(variables):
        where = f"structured.variables[{i}]"
        if not isinstance(raw, dict):
            issues.append(f"{where}: must be an object")
            continue
        extra = set(raw) - {"name", "normal_low", "normal_high", "stats"}
        if extra:
            issues.append(f"{where}: unknown key(s) {', '.join(sorted(extra))}")

        name = raw.get("name")
        if not isinstance(name, str) or not name:
            issues.append(f"{where}.name: must be a non-empty string")
        elif name in seen:
            issues.append(f"{where}.name: duplicate variable '{name}'")
        else:
            seen.add(name)

        low, high = raw.get("normal_low"), raw.get("normal_high")
        numeric = all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in (low, high)
        )
        if not numeric:
            issues.append(f"{where}: normal_low and normal_high must be finite numbers")
        elif not low < high:
            issues.append(f"{where}: normal_low must be below normal_high")

        stats = raw.get("stats", list(STAT_ORDER))
        if not isinstance(stats, list) or not stats:
            issues.append(f"{where}.stats: must be a non-empty list")
        else:
            unknown = [s for s in stats if s not in STAT_ORDER]
            if unknown:
                issues.append(f"{where}.stats: unknown stat(s) {', '.join(map(str, unknown))}")
            if len(set(stats)) != len(stats):
                issues.append(f"{where}.stats: duplicate stats")
    return issues


def recipe_from_config(section: dict) -> List[VariableSpec]:
    issues = validate_recipe_section(section)
    if issues:
        raise ConfigurationError(f"invalid structured recipe: {issues[0]}", issues)
    return [
        VariableSpec(
            variable=raw["name"],
            normal_low=float(raw["normal_low"]),
            normal_high=float(raw["normal_high"]),
            stats=tuple(raw.get("stats", STAT_ORDER)),
        )
        for raw in section["variables"]
    ]


def feature_labels(recipe: Sequence[VariableSpec]) -> List[str]:
    return [f"{spec.variable}_{stat}" for spec in recipe for stat in spec.stats]


# =====================================================
# SUMMARIES
# =====================================================

def summarize_variable(readings, spec: VariableSpec) -> Dict[str, Optional[float]]:
    """
    Per-stat values for one variable; every stat is None when there are no readings.

    Args:
        readings: (value, time) pairs or bare values
        spec: the variable's recipe entry
    """
    values = [float(r[0]) if isinstance(r, (tuple, list)) else float(r) for r in readings]
    if not values:
        return {stat: None for stat in spec.stats}

    n = len(values)
    # fsum is exactly rounded, so the stats do not depend on reading order
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n >= 2 else 0.0
    high = sum(1 for v in values if v > spec.normal_high)
    low = sum(1 for v in values if v < spec.normal_low)

    computed = {
        "mean": mean,
        "std": std,
        "count_high": float(high),
        "count_low": float(low),
        "count_normal": float(n - high - low),
    }
    return {stat: computed[stat] for stat in spec.stats}


def featurize_structured(mdw: ModelingDataWindow, recipe: Sequence[VariableSpec]) -> StructuredFeature:
    """Concatenate per-variable stats in recipe order; unknown variables are ignored and counted"""
    readings: Dict[str, List[float]] = {spec.variable: [] for spec in recipe}
    ignored = 0
    for m in mdw.measurements:
        if m.variable in readings:
            readings[m.variable].append(m.value)
        else:
            ignored += 1

    values: List[float] = []
    mask: List[bool] = []
    for spec in recipe:
        summary = summarize_variable(readings[spec.variable], spec)
        for stat in spec.stats:
            value = summary[stat]
            values.append(0.0 if value is None else value)
            mask.append(value is not None)

    return StructuredFeature(
        vector=np.array(values, dtype=np.float64),
        present_mask=np.array(mask, dtype=bool),
        ignored_measurements=ignored,
    )


def featurize_structured_matrix(
    mdws: Sequence[ModelingDataWindow], recipe: Sequence[VariableSpec]
) -> Tuple[np.ndarray, List[str], Dict[str, int]]:
    """
    Featurize many windows.

    Returns:
        (n x d matrix, feature labels, diagnostics tally)
    """
    labels = feature_labels(recipe)
    matrix = np.zeros((len(mdws), len(labels)), dtype=np.float64)
    tally = {"ignored_measurements": 0, "absent_values": 0}
    for i, mdw in enumerate(mdws):
        feature = featurize_structured(mdw, recipe)
        matrix[i] = feature.vector
        tally["ignored_measurements"] += feature.ignored_measurements
        tally["absent_values"] += int((~feature.present_mask).sum())

    if tally["ignored_measurements"]:
        logger.warning(
            "Ignored %d measurement(s) of variables outside the recipe", tally["ignored_measurements"]
        )
    logger.info("Structured features: %d rows x %d features", len(mdws), len(labels))
    return matrix, labels, tally
