"""
Training configuration, loop and metrics.
"""

from .config import TrainConfig, load_config, save_config
from .metrics import DomainScore, EpochMetrics, MetricsRecord, StepMetrics
from .trainer import Trainer, combined_loss, evaluate, evaluate_target, train, train_step

__all__ = [
    # Configuration
    "TrainConfig",
    "load_config",
    "save_config",

    # Metrics
    "StepMetrics",
    "DomainScore",
    "EpochMetrics",
    "MetricsRecord",

    # Training
    "Trainer",
    "combined_loss",
    "train_step",
    "train",
    "evaluate",
    "evaluate_target",
]
