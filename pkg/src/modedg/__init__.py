"""
modedg: worst-case style exploration for domain generalization

Trains image classifiers on several source domains while searching, per
sample, for the most harmful mixture of styles borrowed from other samples
(Fourier amplitudes or feature statistics), and benchmarks them by holding
out each domain in turn.
"""

__version__ = "0.1.0"

# Import main classes for convenience
from .data import DatasetRequest, DomainDataset, generate_dataset, load_dataset
from .explore import ExploreConfig, explore_batch
from .models import ConvNet, ModelConfig, build_model
from .training import Trainer, TrainConfig, evaluate_target, train

__all__ = [
    "DatasetRequest",
    "DomainDataset",
    "generate_dataset",
    "load_dataset",
    "ExploreConfig",
    "explore_batch",
    "ModelConfig",
    "ConvNet",
    "build_model",
    "TrainConfig",
    "Trainer",
    "train",
    "evaluate_target",
]
