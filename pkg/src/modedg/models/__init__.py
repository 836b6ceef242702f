"""
Seeded convolutional classifiers and their checkpoints.
"""

from .cnn import ConvNet, ModelConfig, build_model
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ModelConfig",
    "ConvNet",
    "build_model",
    "save_checkpoint",
    "load_checkpoint",
]
