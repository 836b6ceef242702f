"""
Seeded random stream derivation.

All randomness is drawn from generators derived from an explicit seed plus a
tuple of integer keys (counter-based), so results never depend on call order
across independent consumers.
"""
import numpy as np


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a generator for the stream identified by ``(seed, *keys)``."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(sequence)


# Stream identifiers
INIT_STREAM = 0
DATA_ORDER_STREAM = 1
EXPLORE_STREAM = 2
