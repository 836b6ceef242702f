"""
Channel statistics of feature maps and their re-application.

The per-channel mean and standard deviation of a feature map carry its style;
the normalized map carries its content. Mixing replaces the statistics with a
simplex combination of the sample's own and its providers' statistics.
"""
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from modedg.autodiff import Tensor, concat, ops, weighted_sum
from modedg.utils.errors import ShapeError, SizeError
from modedg.utils.validation import check_gamma, simplex_weights

EPSILON = 1e-5


@dataclass
class ChannelStats:
    """
    Per-channel mean and standard deviation.

    ``mu`` and ``sigma`` share a shape ``[..., c]``; sigma is floored by
    sqrt(EPSILON) and therefore strictly positive.
    """
    mu: Tensor
    sigma: Tensor

    def __post_init__(self):
        self.mu = ops.as_tensor(self.mu)
        self.sigma = ops.as_tensor(self.sigma)
        if self.mu.shape != self.sigma.shape:
            raise ShapeError(f"mu {self.mu.shape} and sigma {self.sigma.shape} differ")

    @property
    def channels(self) -> int:
        return self.mu.shape[-1]

    def detach(self) -> "ChannelStats":
        """Constant copy, cut from any graph."""
        return ChannelStats(self.mu.detach(), self.sigma.detach())

    def select(self, index) -> "ChannelStats":
        """Index the leading axes of both planes, returning constants."""
        return ChannelStats(Tensor(self.mu.data[index]), Tensor(self.sigma.data[index]))


def channel_stats(feature: Union[Tensor, np.ndarray], eps: float = EPSILON) -> ChannelStats:
    """
    Mean and unbiased standard deviation over the last two axes.

    Args:
        feature: Feature map ``[..., c, h, w]``
        eps: Variance floor

    Returns:
        Statistics of shape ``[..., c]``

    Raises:
        SizeError: If a channel has fewer than 2 spatial positions
    """
    feature = ops.as_tensor(feature)
    if feature.ndim < 3:
        raise ShapeError(f"feature map needs [..., c, h, w], got {feature.shape}")
    count = feature.shape[-1] * feature.shape[-2]
    if count < 2:
        raise SizeError(f"unbiased variance needs h*w >= 2, got {count}")

    mu = ops.mean(feature, axis=(-2, -1), keepdims=True)
    centered = feature - mu
    var = ops.sum(centered * centered, axis=(-2, -1)) / float(count - 1)
    sigma = ops.sqrt(var + eps)
    return ChannelStats(ops.reshape(mu, mu.shape[:-2]), sigma)


def mix_stats(alpha, self_stats: ChannelStats, providers: Sequence[ChannelStats]) -> ChannelStats:
    """
    Convex combination of statistics.

    Args:
        alpha: Weights ``[M + 1]`` (or ``[n, M + 1]`` for a batch); a tensor
            keeps the result differentiable in the weights
        self_stats: Statistics of the explored feature
        providers: M statistics shaped like ``self_stats``

    Returns:
        Mixed statistics ``mu~ = sum_l alpha_l mu_l`` and ``sigma~ = sum_l alpha_l sigma_l``
    """
    simplex_weights(alpha)
    weights = ops.as_tensor(getattr(alpha, "weights", alpha))
    if weights.shape[-1] != len(providers) + 1:
        raise ShapeError(f"{weights.shape[-1]} weights given for {len(providers)} providers")
    for stats in providers:
        if stats.mu.shape != self_stats.mu.shape:
            raise ShapeError(f"provider stats {stats.mu.shape} vs self {self_stats.mu.shape}")

    def stack(planes):
        # [..., c] planes -> [..., M + 1, c]
        return concat([ops.reshape(p, p.shape[:-1] + (1, p.shape[-1])) for p in planes], axis=-2)

    mu = weighted_sum(weights, stack([self_stats.mu] + [p.mu for p in providers]))
    sigma = weighted_sum(weights, stack([self_stats.sigma] + [p.sigma for p in providers]))
    return ChannelStats(mu, sigma)


def apply_stats(feature, self_stats: ChannelStats, mixed: ChannelStats, gamma: float) -> Tensor:
    """
    Re-style a feature map with mixed statistics.

    Returns ``gamma * z~ + (1 - gamma) * z`` where
    ``z~ = mu~ + sigma~ * (z - mu) / sigma``. ``gamma = 0`` returns the input.
    """
    gamma = check_gamma(gamma)
    feature = ops.as_tensor(feature)
    if gamma == 0.0:
        return feature
    if self_stats.mu.shape != feature.shape[:-2] or mixed.mu.shape != feature.shape[:-2]:
        raise ShapeError(f"statistics {mixed.mu.shape} do not match feature {feature.shape}")

    def spatial(t: Tensor) -> Tensor:
        return ops.reshape(t, t.shape + (1, 1))

    normalized = (feature - spatial(self_stats.mu)) / spatial(self_stats.sigma)
    restyled = spatial(mixed.mu) + spatial(mixed.sigma) * normalized
    if gamma == 1.0:
        return restyled
    return gamma * restyled + (1.0 - gamma) * feature
