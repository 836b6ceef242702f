"""
Small convolutional classifiers with an optional style-mixing hook.

Each block is conv3x3 (padding 1) -> relu -> maxpool2, followed by a dense
head. There is no batch normalization, so a sample's output never depends on
the rest of its batch.
"""
import hashlib
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from modedg.autodiff import Tensor, conv2d, dense, flatten, maxpool2d, relu
from modedg.featstyle import ChannelStats, apply_stats, channel_stats, mix_stats
from modedg.utils.errors import ConfigurationError, ShapeError
from modedg.utils.rng import INIT_STREAM, derive_rng


@dataclass
class ModelConfig:
    """Architecture and initialization of a :class:`ConvNet`."""
    channels: Tuple[int, ...] = (32, 64, 128)
    classes: int = 10
    in_channels: int = 3
    image_size: int = 32
    mix_block: Optional[int] = 0  # block whose output is re-styled; None disables the hook
    init_seed: int = 0
    zero_head: bool = False

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)

    def validate(self) -> None:
        """
        Raises:
            ConfigurationError: If the configuration cannot build a model
        """
        if len(self.channels) < 1 or any(c < 1 for c in self.channels):
            raise ConfigurationError(f"need at least one block with positive width, got {self.channels}")
        if self.classes < 2:
            raise ConfigurationError(f"classes must be >= 2, got {self.classes}")
        if self.mix_block is not None and not 0 <= self.mix_block < len(self.channels):
            raise ConfigurationError(f"mix_block {self.mix_block} outside [0, {len(self.channels)})")
        if self.image_size % (2 ** len(self.channels)) != 0:
            raise ConfigurationError(
                f"image_size {self.image_size} does not survive {len(self.channels)} poolings"
            )

    @property
    def feature_size(self) -> int:
        """Spatial side of the last block's output."""
        return self.image_size // (2 ** len(self.channels))

    def parameter_count(self) -> int:
        """Closed-form number of scalar parameters."""
        total, previous = 0, self.in_channels
        for width in self.channels:
            total += width * previous * 9 + width
            previous = width
        flat = self.channels[-1] * self.feature_size ** 2
        return total + flat * self.classes + self.classes

    def to_dict(self) -> Dict[str, Any]:
        return {
            'channels': list(self.channels),
            'classes': self.classes,
            'in_channels': self.in_channels,
            'image_size': self.image_size,
            'mix_block': self.mix_block,
            'init_seed': self.init_seed,
            'zero_head': self.zero_head,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class _Layer:
    weight: str
    bias: str


class ConvNet:
    """conv-relu-maxpool blocks with a dense head; parameters are named tensors."""

    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config
        self.blocks: List[_Layer] = [
            _Layer(f"block{i}.weight", f"block{i}.bias") for i in range(len(config.channels))
        ]
        self.head = _Layer("head.weight", "head.bias")
        self.params: Dict[str, Tensor] = {}
        self._initialize()

    def _initialize(self) -> None:
        """He-uniform weights (bound sqrt(6 / fan_in)) and zero biases."""
        rng = derive_rng(self.config.init_seed, INIT_STREAM)
        previous = self.config.in_channels
        for layer, width in zip(self.blocks, self.config.channels):
            fan_in = previous * 9
            bound = np.sqrt(6.0 / fan_in)
            self._add(layer.weight, rng.uniform(-bound, bound, size=(width, previous, 3, 3)))
            self._add(layer.bias, np.zeros(width))
            previous = width

        flat = previous * self.config.feature_size ** 2
        if self.config.zero_head:
            weight = np.zeros((flat, self.config.classes))
        else:
            bound = np.sqrt(6.0 / flat)
            weight = rng.uniform(-bound, bound, size=(flat, self.config.classes))
        self._add(self.head.weight, weight)
        self._add(self.head.bias, np.zeros(self.config.classes))

    def _add(self, name: str, values: np.ndarray) -> None:
        self.params[name] = Tensor(values, requires_grad=True, name=name)

    # Introspection

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def checksum(self) -> str:
        """SHA-256 over parameter names and bytes; -0.0 and 0.0 hash alike."""
        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode("utf-8"))
            digest.update((self.params[name].data + 0.0).tobytes())
        return digest.hexdigest()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for name, param in self.params.items():
            if name not in state:
                raise ConfigurationError(f"state is missing parameter {name}")
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise ShapeError(f"{name}: stored shape {values.shape}, model expects {param.shape}")
            param.data = values.copy()

    # Forward passes

    def _check_input(self, batch: Tensor) -> None:
        cfg = self.config
        expected = (cfg.in_channels, cfg.image_size, cfg.image_size)
        if batch.ndim != 4 or batch.shape[1:] != expected:
            raise ShapeError(f"model expects input [n, {expected[0]}, {expected[1]}, {expected[2]}], got {batch.shape}")

    def _block(self, index: int, h: Tensor) -> Tensor:
        layer = self.blocks[index]
        return maxpool2d(relu(conv2d(h, self.params[layer.weight], self.params[layer.bias], pad=1)), 2)

    def _head(self, h: Tensor) -> Tensor:
        return dense(flatten(h), self.params[self.head.weight], self.params[self.head.bias])

    def _as_batch(self, batch) -> Tensor:
        batch = batch if isinstance(batch, Tensor) else Tensor(batch)
        self._check_input(batch)
        return batch

    def forward(self, batch) -> Tensor:
        """
        Logits for a batch.

        Args:
            batch: Images ``[n, c, h, w]``

        Returns:
            Logits ``[n, classes]``
        """
        h = self._as_batch(batch)
        for i in range(len(self.blocks)):
            h = self._block(i, h)
        return self._head(h)

    __call__ = forward

    def _hook_index(self) -> int:
        if self.config.mix_block is None:
            raise ConfigurationError("model has no style-mixing hook configured")
        return self.config.mix_block

    def hook_features(self, batch) -> Tensor:
        """Output of the hooked block."""
        hook = self._hook_index()
        h = self._as_batch(batch)
        for i in range(hook + 1):
            h = self._block(i, h)
        return h

    def hook_stats(self, batch) -> ChannelStats:
        """Constant channel statistics at the hook, shape ``[n, c']``."""
        return channel_stats(self.hook_features(batch)).detach()

    def forward_with_mix(self, batch, weights, provider_stats: ChannelStats, gamma: float) -> Tensor:
        """
        Logits with the hooked feature map re-styled per sample.

        Args:
            batch: Images ``[n, c, h, w]``
            weights: Mixing weights ``[n, M + 1]``; pass a tensor to
                differentiate through them
            provider_stats: Provider statistics ``[n, M, c']``
            gamma: Mixing strength in [0, 1]

        Returns:
            Logits ``[n, classes]``

        Raises:
            ConfigurationError: If the hook is unset
        """
        hook = self._hook_index()
        h = self.hook_features(batch)
        n, M = provider_stats.mu.shape[:2]
        if n != h.shape[0]:
            raise ShapeError(f"{n} provider statistics for a batch of {h.shape[0]}")
        own = channel_stats(h)
        providers = [provider_stats.select((slice(None), slot)) for slot in range(M)]
        mixed = mix_stats(weights, own, providers)
        h = apply_stats(h, own, mixed, gamma)
        for i in range(hook + 1, len(self.blocks)):
            h = self._block(i, h)
        return self._head(h)


def build_model(config: Optional[ModelConfig] = None) -> ConvNet:
    """Build a seeded :class:`ConvNet`."""
    return ConvNet(config or ModelConfig())
