from .metrics import (DEFAULT_KS, DEFAULT_THRESHOLDS, TASKS, GroundTruth, MetricRow, Proposal,
                      evaluate, load_ground_truth, load_predictions, recall_at, render_report,
                      report_lines, t_iou)
from .stats import (MANY_TO_MANY_DEFINITION, DatasetStats, LexiconTagger, Tagger, compute_stats,
                    count_many_to_many, tokenize)

__all__ = [
    "DEFAULT_KS", "DEFAULT_THRESHOLDS", "DatasetStats", "GroundTruth", "LexiconTagger",
    "MANY_TO_MANY_DEFINITION", "MetricRow", "Proposal", "TASKS", "Tagger", "compute_stats",
    "count_many_to_many", "evaluate", "load_ground_truth", "load_predictions", "recall_at",
    "render_report", "report_lines", "t_iou", "tokenize",
]
