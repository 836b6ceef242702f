"""
Training run configuration.
"""
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from modedg.explore import ExploreConfig
from modedg.models import ModelConfig
from modedg.utils.errors import ConfigurationError
from modedg.utils.types import Mechanism, Method, ProviderPolicy


@dataclass
class TrainConfig:
    """
    Every setting of one training run.

    The three seeds drive independent streams: ``init_seed`` the parameter
    initialization, ``data_seed`` the batch order and ``explore_seed`` the
    provider draws. Methods with the same ``data_seed`` see the same batches.
    """
    method: Method = Method.ERM
    beta: float = 0.0
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 20
    batch_size: int = 128
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay: float = 0.1
    lr_decay_period: int = 20
    init_seed: int = 0
    data_seed: int = 0
    explore_seed: int = 0
    target_domain: Optional[int] = None
    trace_limit: int = 512
    progress: bool = False

    def __post_init__(self):
        self.method = Method(self.method)
        if isinstance(self.explore, dict):
            self.explore = ExploreConfig.from_dict(self.explore)
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)

    @classmethod
    def for_method(cls, method: Union[Method, str], **overrides) -> "TrainConfig":
        """
        Recommended settings for a method.

        mode_f: K=10, mu=0.05, M=3, gamma=1, beta=0.3, batch-uniform providers.
        mode_a: same exploration with one provider per domain and beta=0.4.
        random_aug: the mode_f settings without inner steps.
        """
        method = Method(method)
        if method is Method.ERM:
            config = cls(method=method, beta=0.0)
        elif method is Method.MODE_A:
            config = cls(method=method, beta=0.4, explore=ExploreConfig(
                K=10, mu=0.05, M=3, gamma=1.0,
                mechanism=Mechanism.FEATSTATS, provider_policy=ProviderPolicy.ONE_PER_DOMAIN,
            ))
        else:
            config = cls(method=method, beta=0.3, explore=ExploreConfig(
                K=0 if method is Method.RANDOM_AUG else 10, mu=0.05, M=3, gamma=1.0,
                mechanism=Mechanism.FOURIER, provider_policy=ProviderPolicy.BATCH_UNIFORM,
            ))
        return replace(config, **overrides) if overrides else config

    @property
    def explore_config(self) -> ExploreConfig:
        """Exploration settings with random_aug's zero inner steps enforced."""
        if self.method is Method.RANDOM_AUG and self.explore.K != 0:
            return replace(self.explore, K=0)
        return self.explore

    def lr_at(self, epoch: int) -> float:
        """Step-decayed learning rate for a 0-based epoch."""
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_period)

    def validate(self) -> None:
        """
        Raises:
            ConfigurationError: If a field is out of range or inconsistent
        """
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"beta must be in [0, 1], got {self.beta}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigurationError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if self.lr_decay_period < 1:
            raise ConfigurationError(f"lr_decay_period must be >= 1, got {self.lr_decay_period}")
        if self.trace_limit < 0:
            raise ConfigurationError(f"trace_limit must be >= 0, got {self.trace_limit}")
        self.explore.validate()
        self.model.validate()
        if self.method is Method.MODE_F and self.explore.mechanism is not Mechanism.FOURIER:
            raise ConfigurationError("mode_f explores with the fourier mechanism")
        if self.method is Method.MODE_A:
            if self.explore.mechanism is not Mechanism.FEATSTATS:
                raise ConfigurationError("mode_a explores with the featstats mechanism")
            if self.model.mix_block is None:
                raise ConfigurationError("mode_a needs a model with a mixing hook (model.mix_block)")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method.value,
            'beta': self.beta,
            'explore': self.explore.to_dict(),
            'model': self.model.to_dict(),
            'epochs': self.epochs,
            'batch_size': self.batch_size,
            'lr': self.lr,
            'momentum': self.momentum,
            'weight_decay': self.weight_decay,
            'lr_decay': self.lr_decay,
            'lr_decay_period': self.lr_decay_period,
            'init_seed': self.init_seed,
            'data_seed': self.data_seed,
            'explore_seed': self.explore_seed,
            'target_domain': self.target_domain,
            'trace_limit': self.trace_limit,
            'progress': self.progress,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown training config fields: {sorted(unknown)}")
        return cls(**data)

    def with_seed(self, seed: int) -> "TrainConfig":
        """Same run with every named seed set to ``seed``."""
        return replace(self, init_seed=seed, data_seed=seed, explore_seed=seed)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: Union[str, Path], method: Optional[Union[Method, str]] = None) -> TrainConfig:
    """
    Read a training config from JSON or YAML.

    A ``method`` with no other fields yields the recommended settings for that
    method; explicit fields override them. Passing ``method`` replaces the
    file's method before the defaults are chosen.
    """
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    if method is not None:
        data['method'] = Method(method).value
    method = data.get('method', Method.ERM.value)
    base = TrainConfig.for_method(method).to_dict()
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    return TrainConfig.from_dict(base)


def save_config(config: TrainConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        if path.suffix in ('.yaml', '.yml'):
            yaml.safe_dump(config.to_dict(), f, sort_keys=False)
        else:
            json.dump(config.to_dict(), f, indent=2)
    return path
