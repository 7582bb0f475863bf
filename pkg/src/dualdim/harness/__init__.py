"""Experiment driver: metrics, analysis exports, configuration, CLI."""

from .metrics import (
    MetricsReport,
    bleu4,
    exact_match_accuracy,
    metrics_report,
    pearson_corr,
)

__all__ = [
    "MetricsReport",
    "bleu4",
    "exact_match_accuracy",
    "metrics_report",
    "pearson_corr",
]
