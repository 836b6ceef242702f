"""
Style-provider selection.

Providers are the samples whose style gets mixed into an explored sample.
Batch policies index into the current minibatch; the fixed policy indexes
into a pool drawn once from the training set.
"""
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from modedg.utils.errors import ConfigurationError
from modedg.utils.types import ProviderPolicy


def select_providers(
    batch_indices: Sequence[int],
    domain_ids: Optional[Sequence[int]],
    policy: ProviderPolicy,
    rng: np.random.Generator,
    M: int = 3,
    domains: Optional[Sequence[int]] = None
) -> np.ndarray:
    """
    Pick M providers for every sample of a batch.

    Under ``ONE_PER_DOMAIN`` a sample draws one provider from every required
    domain, never itself. A sample that is the only member of its domain in
    the batch has no other candidate there and becomes its own provider for
    that slot, so that slot contributes no new style (logged at DEBUG).

    Args:
        batch_indices: One entry per batch sample; only the count is used by
            the batch policies
        domain_ids: Domain of each sample (needed for ``ONE_PER_DOMAIN`` only)
        policy: Selection policy
        rng: Exploration random stream
        M: Providers per sample; ``ONE_PER_DOMAIN`` uses the domain count
        domains: Domains that must be represented under ``ONE_PER_DOMAIN``
            (defaults to those present in the batch)

    Returns:
        Integer array ``[n, M]`` of batch positions, or pool positions for
        ``FIXED``

    Raises:
        ConfigurationError: If the batch cannot supply the providers
    """
    n = len(batch_indices)
    policy = ProviderPolicy(policy)

    if policy is ProviderPolicy.FIXED:
        if M < 1:
            raise ConfigurationError(f"at least one style provider is required, got M={M}")
        return np.tile(np.arange(M), (n, 1))

    if policy is ProviderPolicy.BATCH_UNIFORM:
        if M < 1:
            raise ConfigurationError(f"at least one style provider is required, got M={M}")
        if n <= M:
            raise ConfigurationError(f"batch of {n} samples cannot supply {M} providers per sample")
        chosen = np.empty((n, M), dtype=np.int64)
        for i in range(n):
            picks = rng.choice(n - 1, size=M, replace=False)
            # Skip over the sample itself
            chosen[i] = picks + (picks >= i)
        return chosen

    # One provider per training domain
    if domain_ids is None:
        raise ConfigurationError("one_per_domain provider selection needs domain ids")
    domain_ids = np.asarray(domain_ids)
    if len(domain_ids) != n:
        raise ConfigurationError(f"{len(domain_ids)} domain ids for a batch of {n}")
    required = sorted(set(int(d) for d in (domains if domains is not None else domain_ids)))
    members = {d: np.flatnonzero(domain_ids == d) for d in required}
    missing = [d for d, idx in members.items() if len(idx) == 0]
    if missing:
        raise ConfigurationError(f"batch has no samples from domains {missing}")

    chosen = np.empty((n, len(required)), dtype=np.int64)
    for i in range(n):
        for slot, d in enumerate(required):
            candidates = members[d][members[d] != i]
            if len(candidates):
                chosen[i, slot] = rng.choice(candidates)
            else:
                chosen[i, slot] = i
                logger.debug(f"Sample {i} is the only member of domain {d} in the batch; it provides its own style")
    return chosen


def draw_fixed_pool(count: int, M: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw the M training-set positions used as providers for a whole run.

    Raises:
        ConfigurationError: If the training set is too small
    """
    if M < 1 or count < M:
        raise ConfigurationError(f"cannot draw {M} fixed providers from {count} samples")
    return np.sort(rng.choice(count, size=M, replace=False))
