"""
Audit Engine
Validity checks on the modeling windows behind a set of predictions.

Two audits are run:
- Leakage: MDW text that already names the diagnosis (sepsis-family
  phrases, vasopressor names).
- Vasopressor: a vasopressor-class medication given inside the MDW,
  meaning septic shock is already being treated.

Both are heuristic surrogates for a chart review. Their output is a
review queue, not a verdict.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import pandas as pd

from utils.errors import ConfigurationError
from utils.text_features import mdw_text, tokenize
from utils.windowing import ModelingDataset

logger = logging.getLogger(__name__)


# =====================================================
# AUDIT CHECK DOCUMENTATION
# =====================================================

AUDIT_CHECKS = {
    "leakage": {
        "description": "MDW text contains a configured term at token boundaries",
        "config": "audit.terms",
        "scope": "top-fraction predicted encounters",
    },
    "vasopressor": {
        "description": "MDW contains a medication whose class is a configured vasopressor class",
        "config": "audit.vasopressor_classes",
        "scope": "top-fraction predicted encounters",
    },
}


# =====================================================
# REPORT
# =====================================================

@dataclass(frozen=True)
class AuditReport:
    audit: str
    flagged: Dict[str, Tuple[str, ...]]
    audited_count: int
    terms_fingerprint: str
    terms: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def flagged_rate(self) -> float:
        """|flagged| / |audited|; 0 when nothing was audited"""
        if self.audited_count == 0:
            return 0.0
        return len(self.flagged) / self.audited_count

    def to_dict(self) -> dict:
        return {
            "audit": self.audit,
            "audited_count": self.audited_count,
            "flagged_count": len(self.flagged),
            "flagged_rate": self.flagged_rate,
            "flagged": {eid: list(matches) for eid, matches in sorted(self.flagged.items())},
            "terms": list(self.terms),
            "terms_fingerprint": self.terms_fingerprint,
        }


def terms_fingerprint(terms: Iterable[str]) -> str:
    canonical = json.dumps(sorted(set(terms)), separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _audited_rows(dataset: ModelingDataset, top_ids: Optional[Sequence[str]]):
    if top_ids is None:
        return list(dataset.rows)
    wanted = set(top_ids)
    rows = [row for row in dataset.rows if row.encounter_id in wanted]
    missing = len(wanted) - len(rows)
    if missing:
        logger.warning("%d audited id(s) are not in the dataset and were skipped", missing)
    return rows


# =====================================================
# AUDIT RULES
# =====================================================

def _normalize_term(term: str) -> str:
    return " ".join(tokenize(term))


def leakage_scan(dataset: ModelingDataset, top_ids: Optional[Sequence[str]], term_list: Sequence[str]) -> AuditReport:
    """
    Flag audited encounters whose MDW text contains any term.

    Text and terms go through the feature tokenizer, so "Septic-shock" in a
    note matches the term "septic shock" while "sepsis" does not match
    "urosepsis".

    Args:
        dataset: modeling dataset (not modified)
        top_ids: encounter ids to audit; every row when None
        term_list: phrases to look for
    """
    terms = [t for t in (_normalize_term(t) for t in term_list) if t]
    if not terms:
        raise ConfigurationError("audit.terms: no usable terms")
    terms = sorted(set(terms))

    flagged: Dict[str, Tuple[str, ...]] = {}
    rows = _audited_rows(dataset, top_ids)
    for row in rows:
        padded = f" {' '.join(tokenize(mdw_text(row.mdw)))} "
        matches = tuple(term for term in terms if f" {term} " in padded)
        if matches:
            flagged[row.encounter_id] = matches

    report = AuditReport(
        audit="leakage",
        flagged=flagged,
        audited_count=len(rows),
        terms_fingerprint=terms_fingerprint(terms),
        terms=tuple(terms),
    )
    logger.info(
        "Leakage audit: %d of %d flagged (%.1f%%)", len(flagged), len(rows), 100.0 * report.flagged_rate
    )
    return report


def vasopressor_scan(
    dataset: ModelingDataset, drug_classes: Iterable[str], top_ids: Optional[Sequence[str]] = None
) -> AuditReport:
    """Flag encounters with a vasopressor-class medication inside the MDW (class match ignores case)"""
    classes = sorted({c.strip().lower() for c in drug_classes if c and c.strip()})
    if not classes:
        raise ConfigurationError("audit.vasopressor_classes: no usable classes")

    flagged: Dict[str, Tuple[str, ...]] = {}
    rows = _audited_rows(dataset, top_ids)
    for row in rows:
        drugs = sorted({m.drug for m in row.mdw.med_events if m.drug_class.lower() in classes})
        if drugs:
            flagged[row.encounter_id] = tuple(drugs)

    report = AuditReport(
        audit="vasopressor",
        flagged=flagged,
        audited_count=len(rows),
        terms_fingerprint=terms_fingerprint(classes),
        terms=tuple(classes),
    )
    logger.info(
        "Vasopressor audit: %d of %d flagged (%.1f%%)", len(flagged), len(rows), 100.0 * report.flagged_rate
    )
    return report


# =====================================================
# SUMMARIES
# =====================================================

def audit_frame(reports: Sequence[AuditReport]) -> pd.DataFrame:
    """One row per flagged encounter and audit, for review"""
    records = [
        {"audit": r.audit, "encounter_id": eid, "matches": "; ".join(matches)}
        for r in reports
        for eid, matches in sorted(r.flagged.items())
    ]
    return pd.DataFrame(records, columns=["audit", "encounter_id", "matches"])


def summarize_audits(reports: Sequence[AuditReport]) -> Dict[str, dict]:
    return {r.audit: r.to_dict() for r in reports}

