"""
Configuration for SepsisLens
Default settings, JSON config loading, schema validation and logging setup.
"""

import copy
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Tuple

from utils.cohort_store import parse_timestamp
from utils.errors import ConfigurationError
from utils.label_engine import validate_rule_section
from utils.structured_features import validate_recipe_section

logger = logging.getLogger(__name__)


# =====================================================
# STRUCTURED VARIABLES
# =====================================================

# Twelve default variables with their normal ranges. Illustrative defaults,
# not a published clinical recipe.
DEFAULT_VARIABLES = [
    {"name": "temperature", "normal_low": 36.0, "normal_high": 38.0},
    {"name": "heart_rate", "normal_low": 60.0, "normal_high": 100.0},
    {"name": "resp_rate", "normal_low": 12.0, "normal_high": 20.0},
    {"name": "sbp", "normal_low": 90.0, "normal_high": 140.0},
    {"name": "map", "normal_low": 70.0, "normal_high": 105.0},
    {"name": "spo2", "normal_low": 94.0, "normal_high": 100.0},
    {"name": "wbc", "normal_low": 4.0, "normal_high": 11.0},
    {"name": "lactate", "normal_low": 0.5, "normal_high": 2.0},
    {"name": "creatinine", "normal_low": 0.6, "normal_high": 1.3},
    {"name": "platelets", "normal_low": 150.0, "normal_high": 400.0},
    {"name": "bilirubin", "normal_low": 0.1, "normal_high": 1.2},
    {"name": "glucose", "normal_low": 70.0, "normal_high": 140.0},
]

ALL_STATS = ["mean", "std", "count_high", "count_low", "count_normal"]


# =====================================================
# SEVERE SEPSIS RULE
# =====================================================

# SIRS-style criteria plus organ dysfunction criteria; thresholds are
# illustrative defaults.
DEFAULT_CRITERIA = [
    {"variable": "temperature", "comparator": ">", "threshold": 38.3, "group": "sirs"},
    {"variable": "heart_rate", "comparator": ">", "threshold": 90.0, "group": "sirs"},
    {"variable": "resp_rate", "comparator": ">", "threshold": 20.0, "group": "sirs"},
    {"variable": "wbc", "comparator": ">", "threshold": 12.0, "group": "sirs"},
    {"variable": "sbp", "comparator": "<", "threshold": 90.0, "group": "organ_dysfunction"},
    {"variable": "lactate", "comparator": ">", "threshold": 2.0, "group": "organ_dysfunction"},
    {"variable": "creatinine", "comparator": ">", "threshold": 2.0, "group": "organ_dysfunction"},
    {"variable": "platelets", "comparator": "<", "threshold": 100.0, "group": "organ_dysfunction"},
]

DEFAULT_ICD_CODES = ["R65.20", "R65.21", "995.92", "785.52"]


# =====================================================
# AUDIT
# =====================================================

DEFAULT_AUDIT_TERMS = [
    "sepsis",
    "septic",
    "septic shock",
    "severe sepsis",
    "urosepsis",
    "bacteremia",
    "sirs",
    "norepinephrine",
    "levophed",
    "vasopressin",
    "phenylephrine",
    "dopamine",
    "epinephrine",
]

DEFAULT_VASOPRESSOR_CLASSES = ["vasopressor"]


# =====================================================
# FULL DEFAULT CONFIG TREE
# =====================================================

DEFAULT_CONFIG = {
    "run": {"seed": 0, "out_dir": "out", "n_jobs": 1},
    "data": {"cohort_path": None, "schema_version": "1", "skip_invalid": False, "note_types": None},
    "rule": {"criteria": DEFAULT_CRITERIA, "min_sirs": 2, "min_organ": 1, "window_hours": 6.0},
    "label": {"icd_codes": DEFAULT_ICD_CODES},
    "window": {"horizon_hours": 24.0, "modality": "text", "seed": None},
    "text": {"embeddings_path": None, "tokenizer": "alnum_lower", "mean_pool": False, "dimension": 300},
    "structured": {
        "variables": [dict(v, stats=list(ALL_STATS)) for v in DEFAULT_VARIABLES],
    },
    "model": {
        "lambda": 1.0,
        "select_lambda": False,
        "lambda_grid": [0.01, 0.1, 1.0, 10.0, 100.0],
        "inner_folds": 3,
        "standardize": True,
    },
    "eval": {"folds": 3, "fractions": [0.01, 0.05, 0.10], "split": "cv", "cutoff": None},
    "audit": {
        "terms": DEFAULT_AUDIT_TERMS,
        "vasopressor_classes": DEFAULT_VASOPRESSOR_CLASSES,
        "top_fraction": 0.01,
    },
    "report": {"excel": False, "charts": False},
    "sweep": {"horizons": [4.0, 8.0, 24.0], "fixed_cohort": False},
}

# Sections whose values are free-form dicts or lists and are not walked
# for unknown keys below this level
OPAQUE_KEYS = {"rule.criteria", "structured.variables"}

MODALITIES = ("text", "structured", "both")
SPLITS = ("cv", "temporal")
TOKENIZERS = ("alnum_lower",)


# =====================================================
# LOADING
# =====================================================

def _merge(defaults: dict, overrides: dict, prefix: str, unknown: List[str]) -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            unknown.append(path)
            continue
        if isinstance(defaults[key], dict) and path not in OPAQUE_KEYS:
            if not isinstance(value, dict):
                unknown.append(f"{path} (expected an object)")
                continue
            merged[key] = _merge(defaults[key], value, f"{path}.", unknown)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def merge_config(overrides: dict) -> dict:
    """
    Deep-merge a user config over DEFAULT_CONFIG.

    Raises:
        ConfigurationError: listing every unknown key path
    """
    if not isinstance(overrides, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown: List[str] = []
    merged = _merge(DEFAULT_CONFIG, overrides, "", unknown)
    if unknown:
        raise ConfigurationError(
            f"unknown config key(s): {', '.join(unknown)}",
            [f"{key}: unknown key" for key in unknown],
        )
    return merged


def _resolve_paths(config: dict, base_dir: Path) -> None:
    for section, key in (("data", "cohort_path"), ("text", "embeddings_path"), ("run", "out_dir")):
        value = config[section][key]
        if value and not Path(value).is_absolute():
            config[section][key] = str(base_dir / value)


def load_config(path, overrides: dict = None) -> dict:
    """
    Read a JSON config file and merge it over the defaults.

    Relative paths are resolved against the config file's directory.
    `overrides` are dotted keys (e.g. {"run.seed": 3}) applied last.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config {path} is not valid JSON: line {e.lineno}: {e.msg}") from e

    config = merge_config(raw)
    _resolve_paths(config, path.resolve().parent)
    for dotted, value in (overrides or {}).items():
        set_dotted(config, dotted, value)
    return config


def set_dotted(config: dict, dotted: str, value) -> None:
    section, _, key = dotted.partition(".")
    if section not in config or key not in config[section]:
        raise ConfigurationError(f"unknown config key: {dotted}")
    config[section][key] = value


# =====================================================
# VALIDATION
# =====================================================

def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_config(config: dict, check_paths: bool = True) -> Tuple[bool, List[str]]:
    """
    Validate a merged config tree.

    Checks value types and ranges, the structured recipe, the rule's
    cross-reference to configured variables and (optionally) that referenced
    files exist.

    Returns:
        Tuple of (is_valid, issues) where each issue names its key path
    """
    issues: List[str] = []

    run = config["run"]
    if not isinstance(run["seed"], int) or isinstance(run["seed"], bool):
        issues.append("run.seed: must be an integer")
    if not isinstance(run["n_jobs"], int) or run["n_jobs"] < 1:
        issues.append("run.n_jobs: must be an integer >= 1")
    if not run["out_dir"]:
        issues.append("run.out_dir: must be set")

    data = config["data"]
    if not data["cohort_path"]:
        issues.append("data.cohort_path: must be set")
    elif check_paths and not Path(data["cohort_path"]).is_file():
        issues.append(f"data.cohort_path: file not found: {data['cohort_path']}")
    if data["note_types"] is not None and (not isinstance(data["note_types"], list) or not data["note_types"]):
        issues.append("data.note_types: must be null or a non-empty list")

    window = config["window"]
    if not _is_number(window["horizon_hours"]) or window["horizon_hours"] < 0:
        issues.append("window.horizon_hours: must be a number >= 0")
    if window["modality"] not in MODALITIES:
        issues.append(f"window.modality: must be one of {', '.join(MODALITIES)}")
    if window["seed"] is not None and (not isinstance(window["seed"], int) or isinstance(window["seed"], bool)):
        issues.append("window.seed: must be null or an integer")

    text = config["text"]
    uses_text = window["modality"] in ("text", "both")
    if text["tokenizer"] not in TOKENIZERS:
        issues.append(f"text.tokenizer: must be one of {', '.join(TOKENIZERS)}")
    if not isinstance(text["dimension"], int) or text["dimension"] < 1:
        issues.append("text.dimension: must be a positive integer")
    if uses_text:
        if not text["embeddings_path"]:
            issues.append("text.embeddings_path: required when window.modality uses text")
        elif check_paths and not Path(text["embeddings_path"]).is_file():
            issues.append(f"text.embeddings_path: file not found: {text['embeddings_path']}")

    recipe_issues = validate_recipe_section(config["structured"])
    issues.extend(recipe_issues)
    variable_names = [
        v.get("name") for v in config["structured"].get("variables", []) if isinstance(v, dict)
    ]
    issues.extend(validate_rule_section(config["rule"], variable_names))

    codes = config["label"]["icd_codes"]
    if not isinstance(codes, list) or not codes or not all(isinstance(c, str) and c for c in codes):
        issues.append("label.icd_codes: must be a non-empty list of strings")

    model = config["model"]
    if not _is_number(model["lambda"]) or model["lambda"] < 0:
        issues.append("model.lambda: must be a number >= 0")
    grid = model["lambda_grid"]
    if not isinstance(grid, list) or not grid or not all(_is_number(g) and g >= 0 for g in grid):
        issues.append("model.lambda_grid: must be a non-empty list of numbers >= 0")
    if not isinstance(model["inner_folds"], int) or model["inner_folds"] < 2:
        issues.append("model.inner_folds: must be an integer >= 2")

    ev = config["eval"]
    if not isinstance(ev["folds"], int) or ev["folds"] < 2:
        issues.append("eval.folds: must be an integer >= 2")
    fractions = ev["fractions"]
    if not isinstance(fractions, list) or not fractions or not all(_is_number(p) and 0 < p <= 1 for p in fractions):
        issues.append("eval.fractions: must be a non-empty list of fractions in (0, 1]")
    if ev["split"] not in SPLITS:
        issues.append(f"eval.split: must be one of {', '.join(SPLITS)}")
    if ev["split"] == "temporal":
        if not ev["cutoff"]:
            issues.append("eval.cutoff: required when eval.split is temporal")
        else:
            try:
                parse_timestamp(ev["cutoff"])
            except ValueError as e:
                issues.append(f"eval.cutoff: {e}")

    audit = config["audit"]
    if not isinstance(audit["terms"], list) or not audit["terms"]:
        issues.append("audit.terms: must be a non-empty list")
    if not isinstance(audit["vasopressor_classes"], list) or not audit["vasopressor_classes"]:
        issues.append("audit.vasopressor_classes: must be a non-empty list")
    if not _is_number(audit["top_fraction"]) or not 0 < audit["top_fraction"] <= 1:
        issues.append("audit.top_fraction: must be a fraction in (0, 1]")

    horizons = config["sweep"]["horizons"]
    if not isinstance(horizons, list) or not horizons or not all(_is_number(h) and h >= 0 for h in horizons):
        issues.append("sweep.horizons: must be a non-empty list of numbers >= 0")

    return len(issues) == 0, issues


def require_valid(config: dict, check_paths: bool = True) -> dict:
    is_valid, issues = validate_config(config, check_paths=check_paths)
    if not is_valid:
        raise ConfigurationError(f"invalid config: {issues[0]}", issues)
    return config


def config_fingerprint(config: dict) -> str:
    """Stable hash of the config, ignoring where outputs are written"""
    trimmed = copy.deepcopy(config)
    trimmed["run"].pop("out_dir", None)
    canonical = json.dumps(trimmed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# =====================================================
# LOGGING
# =====================================================

def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
