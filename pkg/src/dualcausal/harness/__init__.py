"""Training, evaluation, diagnostics and the ablation runner."""
from .ablation import AblationResult, data_splits, run_ablation, run_sweep, spurious_matching
from .artifacts import (load_checkpoint, matrix_grid, metrics_table, read_matrix_grid,
                        read_metrics_table, save_checkpoint)
from .diagnostics import coclassification, matching_stats
from .evaluation import MetricsReport, evaluate
from .metrics import average_precision, mean_average_precision, topk_accuracy
from .training import Adam, TrainConfig, TrainResult, train

__all__ = [
    "Adam", "TrainConfig", "TrainResult", "train",
    "MetricsReport", "evaluate",
    "average_precision", "mean_average_precision", "topk_accuracy",
    "matching_stats", "coclassification",
    "AblationResult", "data_splits", "run_ablation", "run_sweep", "spurious_matching",
    "save_checkpoint", "load_checkpoint", "metrics_table", "read_metrics_table",
    "matrix_grid", "read_matrix_grid",
]
