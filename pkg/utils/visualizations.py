"""
Visualizations
ROC charts of pooled holdout scores, written as standalone HTML.
"""

import logging
from pathlib import Path
from typing import Mapping

import pandas as pd
import plotly.graph_objects as go
from sklearn.metrics import roc_curve

from utils.metrics import auc

logger = logging.getLogger(__name__)


def roc_figure(curves: Mapping[str, pd.DataFrame], title: str = "ROC") -> go.Figure:
    """
    One ROC trace per named scores frame (columns score, label).

    Args:
        curves: name -> scores frame
        title: chart title
    """
    fig = go.Figure()
    for name, scores in curves.items():
        fpr, tpr, _ = roc_curve(scores["label"], scores["score"])
        fig.add_trace(
            go.Scatter(
                x=fpr,
                y=tpr,
                mode="lines",
                name=f"{name} (AUC {auc(scores['score'], scores['label']):.3f})",
            )
        )

    fig.add_trace(
        go.Scatter(x=[0, 1], y=[0, 1], mode="lines", name="Chance", line=dict(dash="dash", color="gray"))
    )
    fig.update_layout(
        title=title,
        xaxis_title="False positive rate",
        yaxis_title="True positive rate",
        xaxis=dict(range=[0, 1]),
        yaxis=dict(range=[0, 1]),
        template="plotly_white",
    )
    return fig


def write_roc_html(curves: Mapping[str, pd.DataFrame], path, title: str = "ROC") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    roc_figure(curves, title=title).write_html(path, include_plotlyjs="cdn")
    logger.info("ROC chart written to %s", path)
    return path
