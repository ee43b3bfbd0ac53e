"""
Pipeline
Config-driven orchestration: load -> label -> window -> featurize ->
evaluate -> audit -> report.

Each stage is narrated as "Step i/n: <stage>..." and any failure inside a
stage is re-raised as a PipelineStageError naming it.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from Models.ridge_model import RidgeModel, save_model
from config.settings import config_fingerprint, require_valid
from utils.audit_engine import AuditReport, leakage_scan, summarize_audits, vasopressor_scan
from utils.cohort_store import Cohort, cohort_summary, filter_note_types, load_cohort, parse_timestamp
from utils.errors import ConfigurationError, PipelineStageError, SplitError
from utils.evaluation import EvaluationReport, FeatureMatrix, ModelConfig, cross_validate, fit_final_model, holdout_evaluate
from utils.label_engine import LabelOutcome, label_cohort, rule_from_config
from utils.metrics import top_predicted_ids
from utils.report_generator import (
    comparison_payload,
    read_scores_csv,
    render_comparison_markdown,
    render_report_markdown,
    render_sweep_markdown,
    write_excel,
    write_json,
    write_scores_csv,
    write_text,
)
from utils.structured_features import featurize_structured_matrix, recipe_from_config
from utils.text_features import EmbeddingTable, featurize_text_matrix, get_tokenizer, load_embeddings
from utils.visualizations import write_roc_html
from utils.windowing import ModelingDataset, assemble_dataset, restrict_rows

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    report: EvaluationReport
    scores: pd.DataFrame
    model: Optional[RidgeModel] = None
    audits: List[AuditReport] = field(default_factory=list)
    outputs: Dict[str, Path] = field(default_factory=dict)


@contextmanager
def stage(name: str, step: int, total: int):
    logger.info("Step %d/%d: %s...", step, total, name)
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as e:
        logger.error("Stage '%s' failed: %s", name, e)
        raise PipelineStageError(name, e) from e


# =====================================================
# STAGES
# =====================================================

def window_seed(config: dict) -> int:
    seed = config["window"]["seed"]
    return config["run"]["seed"] if seed is None else seed


def load_inputs(config: dict) -> Cohort:
    data = config["data"]
    cohort = load_cohort(data["cohort_path"], schema_version=data["schema_version"], skip_invalid=data["skip_invalid"])
    if data["note_types"] is not None:
        cohort = filter_note_types(cohort, data["note_types"])
        logger.info("  Kept note types: %s", ", ".join(sorted(data["note_types"])))
    logger.info("  %d encounters from %s", len(cohort), cohort.source_descriptor)
    return cohort


def label_stage(config: dict, cohort: Cohort) -> Dict[str, LabelOutcome]:
    variable_names = [v["name"] for v in config["structured"]["variables"]]
    rule = rule_from_config(config["rule"], variable_names)
    return label_cohort(cohort, rule, config["label"]["icd_codes"])


def window_stage(config: dict, cohort: Cohort, labels, horizon_hours: float, modality: str) -> ModelingDataset:
    dataset = assemble_dataset(
        cohort,
        labels,
        horizon_hours=horizon_hours,
        modality_requirement=modality,
        seed=window_seed(config),
        structured_variables=[v["name"] for v in config["structured"]["variables"]],
    )
    logger.info("  %d rows, %d positive", len(dataset), dataset.stats["positives"])
    return dataset


def load_table(config: dict) -> EmbeddingTable:
    text = config["text"]
    return load_embeddings(text["embeddings_path"], dimension=text["dimension"])


def featurize(config: dict, dataset: ModelingDataset, modality: str, table: Optional[EmbeddingTable]) -> FeatureMatrix:
    """Text columns first, then structured columns, for `both`"""
    mdws = [row.mdw for row in dataset.rows]
    blocks, labels = [], []
    if modality in ("text", "both"):
        text = config["text"]
        X_text, text_labels, _ = featurize_text_matrix(
            mdws, table, tokenizer=get_tokenizer(text["tokenizer"]), mean_pool=text["mean_pool"]
        )
        blocks.append(X_text)
        labels.extend(text_labels)
    if modality in ("structured", "both"):
        X_struct, struct_labels, _ = featurize_structured_matrix(mdws, recipe_from_config(config["structured"]))
        blocks.append(X_struct)
        labels.extend(struct_labels)
    matrix = FeatureMatrix.from_dataset(dataset, np.hstack(blocks), labels)
    logger.info("  %s features: %d rows x %d columns", modality, matrix.X.shape[0], matrix.X.shape[1])
    return matrix


def evaluate_stage(config: dict, matrix: FeatureMatrix) -> Tuple[EvaluationReport, pd.DataFrame]:
    ev = config["eval"]
    model_config = ModelConfig.from_config(config["model"])
    seed = config["run"]["seed"]
    if ev["split"] == "temporal":
        return holdout_evaluate(matrix, parse_timestamp(ev["cutoff"]), model_config, seed, ev["fractions"])
    return cross_validate(matrix, ev["folds"], model_config, seed, ev["fractions"], n_jobs=config["run"]["n_jobs"])


def final_model(config: dict, matrix: FeatureMatrix) -> RidgeModel:
    ev = config["eval"]
    cutoff = parse_timestamp(ev["cutoff"]) if ev["split"] == "temporal" else None
    return fit_final_model(matrix, ModelConfig.from_config(config["model"]), config["run"]["seed"], cutoff=cutoff)


def audit_stage(config: dict, dataset: ModelingDataset, scores: pd.DataFrame) -> List[AuditReport]:
    audit = config["audit"]
    top_ids = top_predicted_ids(
        scores["encounter_id"].astype(str).tolist(), scores["score"].to_numpy(), audit["top_fraction"]
    )
    return [
        leakage_scan(dataset, top_ids, audit["terms"]),
        vasopressor_scan(dataset, audit["vasopressor_classes"], top_ids=top_ids),
    ]


def _annotate(report: EvaluationReport, config: dict, dataset: ModelingDataset, modality: str) -> EvaluationReport:
    return replace(
        report,
        modality=modality,
        horizon_hours=dataset.horizon_hours,
        config_fingerprint=config_fingerprint(config),
        dataset_stats=dict(dataset.stats),
    )


def _out_dir(config: dict) -> Path:
    out_dir = Path(config["run"]["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


# =====================================================
# ENTRY POINTS
# =====================================================

def run_pipeline(config: dict) -> RunResult:
    """
    Full run: writes report.json, report.md, scores.csv, model.json and
    audit.json (plus report.xlsx / roc.html when enabled) to run.out_dir.
    """
    require_valid(config)
    total = 7
    modality = config["window"]["modality"]

    with stage("loading cohort", 1, total):
        cohort = load_inputs(config)
    with stage("labeling", 2, total):
        labels = label_stage(config, cohort)
    with stage("windowing", 3, total):
        dataset = window_stage(config, cohort, labels, config["window"]["horizon_hours"], modality)
    with stage("featurizing", 4, total):
        table = load_table(config) if modality in ("text", "both") else None
        matrix = featurize(config, dataset, modality, table)
    with stage("training and evaluating", 5, total):
        report, scores = evaluate_stage(config, matrix)
        report = _annotate(report, config, dataset, modality)
        model = final_model(config, matrix)
    with stage("auditing", 6, total):
        audits = audit_stage(config, dataset, scores)
    with stage("writing reports", 7, total):
        out_dir = _out_dir(config)
        outputs = {
            "report.json": write_json(out_dir / "report.json", report.to_dict()),
            "report.md": write_text(out_dir / "report.md", render_report_markdown(report, audits)),
            "scores.csv": write_scores_csv(scores, out_dir / "scores.csv"),
            "audit.json": write_json(out_dir / "audit.json", summarize_audits(audits)),
        }
        save_model(model, out_dir / "model.json")
        outputs["model.json"] = out_dir / "model.json"
        if config["report"]["excel"]:
            outputs["report.xlsx"] = write_excel(
                out_dir / "report.xlsx", report, scores, cohort_overview=cohort_summary(cohort), audits=audits
            )
        if config["report"]["charts"]:
            outputs["roc.html"] = write_roc_html({modality: scores}, out_dir / "roc.html", title="Pooled holdout ROC")

    logger.info("Run complete: AUC %.4f on %d rows, outputs in %s", report.auc, report.n, out_dir)
    return RunResult(report=report, scores=scores, model=model, audits=audits, outputs=outputs)


def run_audit(config: dict, scores_path=None) -> List[AuditReport]:
    """Re-run the audits over the scores.csv of an earlier run"""
    require_valid(config)
    total = 5
    out_dir = Path(config["run"]["out_dir"])
    scores_path = Path(scores_path) if scores_path else out_dir / "scores.csv"

    with stage("reading scores", 1, total):
        scores = read_scores_csv(scores_path)
        logger.info("  %d scored rows from %s", len(scores), scores_path)
    with stage("loading cohort", 2, total):
        cohort = load_inputs(config)
    with stage("labeling", 3, total):
        labels = label_stage(config, cohort)
    with stage("windowing", 4, total):
        dataset = window_stage(
            config, cohort, labels, config["window"]["horizon_hours"], config["window"]["modality"]
        )
        unknown = set(scores["encounter_id"]) - set(dataset.encounter_ids)
        if unknown:
            raise SplitError(
                f"{len(unknown)} scored encounter(s) are not in the rebuilt dataset; "
                "was the config changed since the run?"
            )
    with stage("auditing", 5, total):
        audits = audit_stage(config, dataset, scores)
        write_json(_out_dir(config) / "audit.json", summarize_audits(audits))
    return audits


def compare_modalities(config: dict) -> Dict[str, EvaluationReport]:
    """
    Text, structured and combined models on the same rows: those whose
    MDW has both modalities. Writes comparison.json and comparison.md.
    """
    require_valid(config)
    if not config["text"]["embeddings_path"]:
        raise ConfigurationError("text.embeddings_path: required to compare modalities")
    total = 6
    with stage("loading cohort", 1, total):
        cohort = load_inputs(config)
    with stage("labeling", 2, total):
        labels = label_stage(config, cohort)
    with stage("windowing", 3, total):
        dataset = window_stage(config, cohort, labels, config["window"]["horizon_hours"], "both")
    with stage("featurizing", 4, total):
        table = load_table(config)
        matrices = {m: featurize(config, dataset, m, table) for m in ("text", "structured", "both")}
    reports, curves = {}, {}
    with stage("training and evaluating", 5, total):
        for modality, matrix in matrices.items():
            report, scores = evaluate_stage(config, matrix)
            reports[modality] = _annotate(report, config, dataset, modality)
            curves[modality] = scores
    with stage("writing reports", 6, total):
        out_dir = _out_dir(config)
        write_json(out_dir / "comparison.json", comparison_payload(reports))
        write_text(out_dir / "comparison.md", render_comparison_markdown(reports))
        if config["report"]["charts"]:
            write_roc_html(curves, out_dir / "comparison_roc.html", title="ROC by modality")

    logger.info(
        "Comparison AUC: %s", ", ".join(f"{m}={r.auc:.4f}" for m, r in reports.items())
    )
    return reports


def sweep_horizons(config: dict) -> List[EvaluationReport]:
    """One evaluation per horizon in sweep.horizons; writes sweep.json and sweep.md"""
    require_valid(config)
    sweep = config["sweep"]
    horizons = sorted(float(h) for h in sweep["horizons"])
    modality = config["window"]["modality"]
    total = 4

    with stage("loading cohort", 1, total):
        cohort = load_inputs(config)
    with stage("labeling", 2, total):
        labels = label_stage(config, cohort)
    with stage("evaluating horizons", 3, total):
        table = load_table(config) if modality in ("text", "both") else None
        fixed_ids = None
        if sweep["fixed_cohort"]:
            fixed_ids = window_stage(config, cohort, labels, horizons[-1], modality).encounter_ids

        reports = []
        for horizon in horizons:
            logger.info("  Horizon %g hours", horizon)
            dataset = window_stage(config, cohort, labels, horizon, modality)
            if fixed_ids is not None:
                dataset = restrict_rows(dataset, fixed_ids)
            report, _ = evaluate_stage(config, featurize(config, dataset, modality, table))
            reports.append(_annotate(report, config, dataset, modality))
    with stage("writing reports", 4, total):
        out_dir = _out_dir(config)
        write_json(
            out_dir / "sweep.json",
            {"fixed_cohort": bool(sweep["fixed_cohort"]), "reports": [r.to_dict() for r in reports]},
        )
        write_text(out_dir / "sweep.md", render_sweep_markdown(reports, fixed_cohort=sweep["fixed_cohort"]))
    return reports
