"""
Per-sample worst-case exploration of style.

For every sample of a batch the mixing weights start uniform and climb the
classification loss with K fixed-size sign-gradient steps on the simplex. The
model is only read; each sample's weights move independently of the others.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from modedg.autodiff import Tensor, grad, softmax_cross_entropy
from modedg.featstyle import ChannelStats
from modedg.fourier import alpha_grads_f, combine_directions, fourier_directions
from modedg.utils.errors import ConfigurationError
from modedg.utils.types import Mechanism, ProviderPolicy

from .providers import select_providers
from .simplex import Alpha, alpha_update_batch, init_alpha_batch


@dataclass
class ExploreConfig:
    """Inner-maximization settings."""
    K: int = 10
    mu: float = 0.05
    M: int = 3
    gamma: float = 1.0
    mechanism: Mechanism = Mechanism.FOURIER
    provider_policy: ProviderPolicy = ProviderPolicy.BATCH_UNIFORM
    clamp: bool = True
    num_workers: int = 1

    def __post_init__(self):
        self.mechanism = Mechanism(self.mechanism)
        self.provider_policy = ProviderPolicy(self.provider_policy)

    def validate(self) -> None:
        """
        Raises:
            ConfigurationError: If a field is out of range
        """
        if self.K < 0:
            raise ConfigurationError(f"K must be >= 0, got {self.K}")
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.M < 1:
            raise ConfigurationError(f"M must be >= 1, got {self.M}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.num_workers < 1:
            raise ConfigurationError(f"num_workers must be >= 1, got {self.num_workers}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'K': self.K,
            'mu': self.mu,
            'M': self.M,
            'gamma': self.gamma,
            'mechanism': self.mechanism.value,
            'provider_policy': self.provider_policy.value,
            'clamp': self.clamp,
            'num_workers': self.num_workers,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExploreConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class ExploreTrace:
    """Loss and weights of one sample at inner steps 0..K."""
    losses: List[float] = field(default_factory=list)
    alphas: List[Alpha] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.losses)


@dataclass
class ExploreResult:
    """
    Outcome of exploring a batch.

    Attributes:
        augmented: Final generated images ``[n, c, h, w]``; the clean images
            for the feature-statistics mechanism, whose style is applied
            inside the model
        alphas: Final weights ``[n, M + 1]``
        providers: Provider positions ``[n, M]``
        provider_stats: Hook statistics ``[n, M, c']`` (feature statistics only)
        losses: Per-step losses ``[K + 1, n]``
        weights_history: Per-step weights ``[K + 1, n, M + 1]``
        forwards: Batch forward passes spent
        frames: Generated images at every inner step ``[K + 1, n, c, h, w]``
            when requested (Fourier mechanism only)
    """
    augmented: np.ndarray
    alphas: np.ndarray
    providers: np.ndarray
    losses: np.ndarray
    weights_history: np.ndarray
    provider_stats: Optional[ChannelStats] = None
    forwards: int = 0
    frames: Optional[np.ndarray] = None

    @property
    def traces(self) -> List[ExploreTrace]:
        return [self.trace(i) for i in range(self.alphas.shape[0])]

    def trace(self, i: int) -> ExploreTrace:
        return ExploreTrace(
            losses=[float(v) for v in self.losses[:, i]],
            alphas=[Alpha(w) for w in self.weights_history[:, i]]
        )


@dataclass
class _ChunkResult:
    augmented: np.ndarray
    weights: np.ndarray
    losses: np.ndarray
    history: np.ndarray
    frames: Optional[np.ndarray] = None


def _explore_fourier(model, x, labels, provider_images, config: ExploreConfig, record: bool = False) -> _ChunkResult:
    directions = fourier_directions(x, provider_images)
    weights = init_alpha_batch(len(x), provider_images.shape[1])
    losses, history, frames = [], [weights], []
    for _ in range(config.K):
        step_losses, alpha_grad, x_step = alpha_grads_f(
            model, weights, config.gamma, directions, labels, clamp=config.clamp
        )
        losses.append(step_losses)
        if record:
            frames.append(x_step)
        weights = alpha_update_batch(weights, alpha_grad, config.mu)
        history.append(weights)

    # Step K only needs the loss
    x_hat = combine_directions(weights, config.gamma, directions, clamp=config.clamp)
    final = softmax_cross_entropy(model.forward(Tensor(x_hat)), labels, reduction="none")
    losses.append(final.data.copy())
    frames.append(x_hat)
    return _ChunkResult(x_hat, weights, np.stack(losses), np.stack(history), np.stack(frames) if record else None)


def _explore_featstats(model, x, labels, provider_stats: ChannelStats, config: ExploreConfig) -> _ChunkResult:
    weights = init_alpha_batch(len(x), provider_stats.mu.shape[1])
    batch = Tensor(x)
    losses, history = [], [weights]
    for k in range(config.K + 1):
        leaf = Tensor(weights, requires_grad=k < config.K)
        logits = model.forward_with_mix(batch, leaf, provider_stats, config.gamma)
        step_losses = softmax_cross_entropy(logits, labels, reduction="none")
        losses.append(step_losses.data.copy())
        if k < config.K:
            alpha_grad = grad(step_losses.sum(), [leaf])[leaf]
            weights = alpha_update_batch(weights, alpha_grad, config.mu)
            history.append(weights)
    return _ChunkResult(x.copy(), weights, np.stack(losses), np.stack(history))


def explore_batch(
    model,
    batch: np.ndarray,
    labels: np.ndarray,
    config: ExploreConfig,
    rng: np.random.Generator,
    domain_ids: Optional[Sequence[int]] = None,
    domains: Optional[Sequence[int]] = None,
    pool: Optional[np.ndarray] = None,
    record_frames: bool = False
) -> ExploreResult:
    """
    Explore the worst-case style of every sample in a batch.

    Args:
        model: Classifier exposing ``forward``, and for the feature-statistics
            mechanism ``forward_with_mix`` and ``hook_stats``
        batch: Images ``[n, c, h, w]`` with pixels in [0, 1]
        labels: Class index per sample
        config: Exploration settings
        rng: Exploration random stream, used only for provider selection
        domain_ids: Domain of each sample (one-per-domain policy)
        domains: Training domains that must supply providers
        pool: Fixed provider images ``[M, c, h, w]`` (fixed policy)
        record_frames: Keep the generated image of every inner step in
            ``ExploreResult.frames``

    Returns:
        Final generated samples, weights and per-step traces

    Raises:
        ConfigurationError: If frames are requested for the feature-statistics
            mechanism, which never produces images
    """
    config.validate()
    if record_frames and config.mechanism is not Mechanism.FOURIER:
        raise ConfigurationError("only the fourier mechanism generates images to record")
    batch = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(batch)

    providers = select_providers(
        np.arange(n), domain_ids, config.provider_policy, rng, M=config.M, domains=domains
    )
    if config.provider_policy is ProviderPolicy.FIXED:
        if pool is None:
            raise ConfigurationError("fixed provider policy needs a provider pool")
        provider_images = np.asarray(pool, dtype=np.float64)[providers]
    else:
        provider_images = batch[providers]

    provider_stats = None
    if config.mechanism is Mechanism.FEATSTATS:
        M = providers.shape[1]
        flat = model.hook_stats(provider_images.reshape((n * M,) + batch.shape[1:]))
        provider_stats = ChannelStats(
            Tensor(flat.mu.data.reshape(n, M, -1)), Tensor(flat.sigma.data.reshape(n, M, -1))
        )

    def run(indices: np.ndarray) -> _ChunkResult:
        if config.mechanism is Mechanism.FOURIER:
            return _explore_fourier(
                model, batch[indices], labels[indices], provider_images[indices], config, record=record_frames
            )
        return _explore_featstats(model, batch[indices], labels[indices], provider_stats.select(indices), config)

    chunks = [c for c in np.array_split(np.arange(n), min(config.num_workers, n)) if len(c)]
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as executor:
            results = list(executor.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    result = ExploreResult(
        augmented=np.concatenate([r.augmented for r in results]),
        alphas=np.concatenate([r.weights for r in results]),
        providers=providers,
        losses=np.concatenate([r.losses for r in results], axis=1),
        weights_history=np.concatenate([r.history for r in results], axis=1),
        provider_stats=provider_stats,
        forwards=config.K + 1,
        frames=np.concatenate([r.frames for r in results], axis=1) if record_frames else None,
    )
    logger.debug(
        f"Explored {n} samples: mean loss {result.losses[0].mean():.4f} -> {result.losses[-1].mean():.4f}"
    )
    return result
