"""
Report Generator
Writes run outputs: report.json, report.md, scores.csv, audit.json and the
comparison / sweep tables, plus the optional Excel workbook.

Markdown tables follow the layout of the capture tables they are read
against: one column per top fraction, rows for sample size, targets found,
% of sample, % of all targets and AUC.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import pandas as pd

from utils.audit_engine import AUDIT_CHECKS, AuditReport, audit_frame
from utils.evaluation import EvaluationReport
from utils.metrics import CaptureRow

logger = logging.getLogger(__name__)

MODALITY_TITLES = {"text": "Text", "structured": "Structured", "both": "Both"}


# =====================================================
# FILE WRITERS
# =====================================================

def write_json(path, payload) -> Path:
    """Sorted keys, no timestamps: identical inputs give identical bytes"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_scores_csv(scores: pd.DataFrame, path) -> Path:
    """encounter_id,score,label,fold with round-trip float precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scores[["encounter_id", "score", "label", "fold"]].to_csv(
        path, index=False, float_format="%.17g", lineterminator="\n"
    )
    return path


def read_scores_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"encounter_id": str, "fold": str}, float_precision="round_trip")


def write_excel(
    path,
    report: EvaluationReport,
    scores: pd.DataFrame,
    cohort_overview: Optional[pd.DataFrame] = None,
    audits: Sequence[AuditReport] = (),
) -> Path:
    """Workbook with Summary, Capture and Scores sheets (plus Cohort / Audit when given)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    summary = pd.DataFrame(
        [
            ("modality", report.modality),
            ("horizon_hours", report.horizon_hours),
            ("split", report.split.get("kind")),
            ("n", report.n),
            ("positives", report.positives),
            ("auc", report.auc),
            ("feature_count", report.feature_count),
            ("config_fingerprint", report.config_fingerprint),
        ],
        columns=["field", "value"],
    )
    capture = pd.DataFrame([c.to_dict() for c in report.captures])

    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        summary.to_excel(writer, sheet_name="Summary", index=False)
        capture.to_excel(writer, sheet_name="Capture", index=False)
        scores.to_excel(writer, sheet_name="Scores", index=False)
        if cohort_overview is not None:
            cohort_overview.to_excel(writer, sheet_name="Cohort", index=False)
        if audits:
            audit_frame(audits).to_excel(writer, sheet_name="Audit", index=False)

    logger.info("Excel report written to %s", path)
    return path


# =====================================================
# MARKDOWN TABLES
# =====================================================

def _fraction_heading(p: float) -> str:
    return f"Top {p * 100:g}% Predicted"


def capture_table(captures: Sequence[CaptureRow], auc: float) -> List[str]:
    """Capture rows as a markdown table, AUC in the first column"""
    lines = [
        "| | " + " | ".join(_fraction_heading(c.fraction) for c in captures) + " |",
        "|---|" + "---:|" * len(captures),
        "| Sample Size | " + " | ".join(f"{c.k_selected:,}" for c in captures) + " |",
        "| Targets found | " + " | ".join(f"{c.positives_found:,}" for c in captures) + " |",
        "| % of Sample | " + " | ".join(f"{c.precision_pct}%" for c in captures) + " |",
        "| % of All Targets | " + " | ".join(f"{c.recall_pct}%" for c in captures) + " |",
        f"| AUC | {auc:.3f} |" + " |" * (len(captures) - 1),
    ]
    return lines


def _split_line(split: Mapping) -> str:
    if split.get("kind") == "temporal":
        return (
            f"temporal split at {split['cutoff']} "
            f"({split['train_rows']:,} train / {split['test_rows']:,} test)"
        )
    return f"{split.get('folds')}-fold stratified cross-validation (seed {split.get('seed')}), pooled holdouts"


def render_report_markdown(report: EvaluationReport, audits: Sequence[AuditReport] = ()) -> str:
    title = MODALITY_TITLES.get(report.modality, report.modality)
    lines = [
        f"# Severe sepsis prediction: {title}, {report.horizon_hours:g}-hour horizon",
        "",
        f"- Evaluation: {_split_line(report.split)}",
        f"- Encounters evaluated: {report.n:,} ({report.positives:,} positive, "
        f"{100.0 * report.positives / report.n:.1f}%)",
        f"- Features: {report.feature_count}",
        f"- Lambda: {', '.join(f'{lam:g}' for lam in report.lambdas)}",
        f"- Config fingerprint: `{report.config_fingerprint}`",
        "",
    ]
    lines.extend(capture_table(report.captures, report.auc))

    if audits:
        lines.extend(["", "## Audits", ""])
        for audit in audits:
            check = AUDIT_CHECKS.get(audit.audit, {})
            lines.append(
                f"- {audit.audit}: {len(audit.flagged)} of {audit.audited_count} flagged "
                f"({100.0 * audit.flagged_rate:.1f}%). {check.get('description', '')}".rstrip()
            )
        lines.extend(["", "Flags are a review queue for chart review, not a verdict."])
    return "\n".join(lines) + "\n"


def render_comparison_markdown(reports: Mapping[str, EvaluationReport]) -> str:
    """
    One row per modality: AUC, then number in set and positives found for
    each top fraction. All reports share the same rows.
    """
    modalities = [m for m in ("text", "structured", "both") if m in reports]
    first = reports[modalities[0]]
    header = "| Type of data | AUC | " + " | ".join(
        f"{_fraction_heading(c.fraction)}: Number In Set | Severe Sepsis" for c in first.captures
    ) + " |"
    lines = [
        f"# Modality comparison, {first.horizon_hours:g}-hour horizon",
        "",
        f"- Encounters with both text and structured data: {first.n:,} "
        f"({first.positives:,} positive, {100.0 * first.positives / first.n:.1f}%)",
        f"- Evaluation: {_split_line(first.split)}",
        "",
        header,
        "|---|---:|" + "---:|---:|" * len(first.captures),
    ]
    for m in modalities:
        report = reports[m]
        cells = " | ".join(f"{c.k_selected:,} | {c.positives_found:,}" for c in report.captures)
        lines.append(f"| {MODALITY_TITLES[m]} | {report.auc:.3f} | {cells} |")
    return "\n".join(lines) + "\n"


def render_sweep_markdown(reports: Sequence[EvaluationReport], fixed_cohort: bool = False) -> str:
    title = MODALITY_TITLES.get(reports[0].modality, reports[0].modality)
    lines = [f"# Horizon sweep: {title}", ""]
    if fixed_cohort:
        lines.extend(["Every horizon uses the encounters usable at the longest horizon.", ""])
    for report in reports:
        lines.extend(
            [
                f"## {report.horizon_hours:g} hours: {report.n:,} encounters, {report.positives:,} positive",
                "",
            ]
        )
        lines.extend(capture_table(report.captures, report.auc))
        lines.append("")
    return "\n".join(lines)


def comparison_payload(reports: Mapping[str, EvaluationReport]) -> Dict[str, dict]:
    return {m: r.to_dict() for m, r in reports.items()}
