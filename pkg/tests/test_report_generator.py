import json

import pandas as pd
import pytest
from openpyxl import load_workbook

from utils.audit_engine import AuditReport
from utils.evaluation import EvaluationReport
from utils.metrics import capture_row
from utils.report_generator import (
    capture_table,
    read_scores_csv,
    render_comparison_markdown,
    render_report_markdown,
    render_sweep_markdown,
    write_excel,
    write_json,
    write_scores_csv,
)
from utils.visualizations import roc_figure, write_roc_html


def make_report(modality="text", auc=0.81, found=(115, 217, 247), n=13603, positives=425, horizon=24.0):
    captures = [capture_row(n, p, f, positives) for p, f in zip((0.01, 0.05, 0.10), found)]
    return EvaluationReport(
        auc=auc,
        captures=captures,
        n=n,
        positives=positives,
        split={"kind": "cv", "folds": 3, "seed": 0},
        lambdas=[1.0, 1.0, 1.0],
        feature_count=300,
        modality=modality,
        horizon_hours=horizon,
        config_fingerprint="abc123",
    )


@pytest.fixture
def scores():
    return pd.DataFrame(
        {
            "encounter_id": ["E1", "E2", "E3", "E4"],
            "score": [0.9, 0.1, 0.4, 1 / 3],
            "label": [1, 0, 1, 0],
            "fold": [0, 1, 2, 0],
        }
    )


class TestMarkdown:
    def test_capture_table_rows(self):
        lines = capture_table(make_report().captures, 0.81)
        assert lines[0] == "| | Top 1% Predicted | Top 5% Predicted | Top 10% Predicted |"
        assert lines[2] == "| Sample Size | 136 | 680 | 1,360 |"
        assert lines[3] == "| Targets found | 115 | 217 | 247 |"
        assert lines[5] == "| % of All Targets | 27% | 51% | 58% |"
        assert lines[6].startswith("| AUC | 0.810 |")

    def test_report_mentions_audits(self):
        audit = AuditReport("leakage", {"E1": ("sepsis",)}, 4, "f00")
        text = render_report_markdown(make_report(), [audit])
        assert "24-hour horizon" in text
        assert "leakage: 1 of 4 flagged (25.0%)" in text
        assert "review queue" in text

    def test_comparison_has_one_row_per_modality(self):
        reports = {
            "text": make_report("text", 0.81, (115, 217, 247)),
            "structured": make_report("structured", 0.80, (112, 206, 248)),
            "both": make_report("both", 0.85, (125, 239, 272)),
        }
        text = render_comparison_markdown(reports)
        assert "| Type of data | AUC | Top 1% Predicted: Number In Set | Severe Sepsis |" in text
        assert "| Text | 0.810 | 136 | 115 | 680 | 217 | 1,360 | 247 |" in text
        assert "| Both | 0.850 | 136 | 125 | 680 | 239 | 1,360 | 272 |" in text

    def test_sweep_sections(self):
        reports = [make_report(horizon=h) for h in (4.0, 8.0, 24.0)]
        text = render_sweep_markdown(reports, fixed_cohort=True)
        assert text.count("## ") == 3
        assert "longest horizon" in text


class TestFiles:
    def test_json_is_sorted_and_stable(self, tmp_path):
        write_json(tmp_path / "a.json", {"b": 1, "a": [1, 2]})
        write_json(tmp_path / "b.json", {"a": [1, 2], "b": 1})
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_scores_reload_exactly(self, tmp_path, scores):
        write_scores_csv(scores, tmp_path / "scores.csv")
        reloaded = read_scores_csv(tmp_path / "scores.csv")
        assert reloaded["score"].tolist() == scores["score"].tolist()
        assert reloaded["encounter_id"].tolist() == ["E1", "E2", "E3", "E4"]

    def test_excel_sheets(self, tmp_path, scores):
        audit = AuditReport("leakage", {"E1": ("sepsis",)}, 4, "f00")
        path = write_excel(tmp_path / "r.xlsx", make_report(n=400, positives=40, found=(4, 15, 25)), scores, audits=[audit])
        assert load_workbook(path).sheetnames == ["Summary", "Capture", "Scores", "Audit"]

    def test_report_json_round_trips(self, tmp_path):
        payload = make_report().to_dict()
        write_json(tmp_path / "r.json", payload)
        loaded = json.loads((tmp_path / "r.json").read_text())
        assert loaded["captures"][0]["k_selected"] == 136
        assert loaded["split"] == {"folds": 3, "kind": "cv", "seed": 0}


class TestRoc:
    def test_figure_has_trace_per_curve_plus_chance(self, scores):
        fig = roc_figure({"text": scores, "both": scores})
        assert len(fig.data) == 3
        assert fig.data[0].name == "text (AUC 1.000)"

    def test_html_written(self, tmp_path, scores):
        path = write_roc_html({"text": scores}, tmp_path / "roc.html")
        assert "plotly" in path.read_text(encoding="utf-8").lower()
