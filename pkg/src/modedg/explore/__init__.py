"""
Inner maximization over style mixing weights.
"""

from .simplex import Alpha, alpha_update, alpha_update_batch, init_alpha, init_alpha_batch
from .providers import draw_fixed_pool, select_providers
from .explorer import ExploreConfig, ExploreResult, ExploreTrace, explore_batch

__all__ = [
    # Simplex
    "Alpha",
    "init_alpha",
    "init_alpha_batch",
    "alpha_update",
    "alpha_update_batch",

    # Providers
    "select_providers",
    "draw_fixed_pool",

    # Exploration
    "ExploreConfig",
    "ExploreTrace",
    "ExploreResult",
    "explore_batch",
]
