"""
Per-step and per-epoch training metrics.
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from modedg.utils.types import SampleID

METRICS_COLUMNS = ["epoch", "split", "domain", "loss", "accuracy", "seconds"]
TRACE_COLUMNS = ["epoch", "sample_id", "step_k", "loss"]


@dataclass
class StepMetrics:
    """One optimizer step."""
    loss: float
    clean_loss: float
    aug_loss: Optional[float]
    correct: int
    samples: int
    forwards: int
    explore_seconds: float = 0.0


@dataclass
class DomainScore:
    """Accuracy and mean loss on one (domain, split)."""
    domain: str
    loss: float
    accuracy: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EpochMetrics:
    """Summary of one epoch."""
    epoch: int
    lr: float
    train_loss: float
    train_clean_loss: float
    train_aug_loss: Optional[float]
    train_accuracy: float
    forwards: int
    seconds: float
    validation: List[DomainScore] = field(default_factory=list)

    @property
    def mean_val_accuracy(self) -> float:
        if not self.validation:
            return float("nan")
        return float(np.mean([s.accuracy for s in self.validation]))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['validation'] = [s.to_dict() for s in self.validation]
        return data


@dataclass
class MetricsRecord:
    """
    Everything measured during a run.

    ``target`` stays empty during training; it is filled by evaluating the
    held-out domain afterwards.
    """
    epochs: List[EpochMetrics] = field(default_factory=list)
    target: Optional[DomainScore] = None
    traces: List[Dict[str, Any]] = field(default_factory=list)

    def add_trace(self, epoch: int, sample_id: SampleID, losses: np.ndarray) -> None:
        for step_k, loss in enumerate(losses):
            self.traces.append({'epoch': epoch, 'sample_id': int(sample_id), 'step_k': step_k, 'loss': float(loss)})

    def to_frame(self) -> pd.DataFrame:
        """Long table ``(epoch, split, domain, loss, accuracy, seconds)``."""
        rows = []
        for epoch in self.epochs:
            rows.append({
                'epoch': epoch.epoch, 'split': 'train', 'domain': 'all',
                'loss': epoch.train_loss, 'accuracy': epoch.train_accuracy, 'seconds': epoch.seconds,
            })
            for score in epoch.validation:
                rows.append({
                    'epoch': epoch.epoch, 'split': 'val', 'domain': score.domain,
                    'loss': score.loss, 'accuracy': score.accuracy, 'seconds': epoch.seconds,
                })
        if self.target is not None:
            last = self.epochs[-1].epoch if self.epochs else 0
            rows.append({
                'epoch': last, 'split': 'target', 'domain': self.target.domain,
                'loss': self.target.loss, 'accuracy': self.target.accuracy, 'seconds': 0.0,
            })
        return pd.DataFrame(rows, columns=METRICS_COLUMNS)

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.traces, columns=TRACE_COLUMNS)

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False)
        return path

    def write_traces(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.trace_frame().to_csv(path, index=False)
        return path

    def summary(self) -> Dict[str, Any]:
        last = self.epochs[-1] if self.epochs else None
        return {
            'epochs': len(self.epochs),
            'final_train_loss': last.train_loss if last else None,
            'val_accuracy': {s.domain: s.accuracy for s in last.validation} if last else {},
            'mean_val_accuracy': last.mean_val_accuracy if last else None,
            'target': self.target.to_dict() if self.target else None,
            'forwards_per_epoch': last.forwards if last else None,
            'seconds_per_epoch': float(np.mean([e.seconds for e in self.epochs])) if self.epochs else None,
        }
