"""
Type definitions and enums shared across the modedg package.
"""
from enum import Enum
from typing import NewType, Tuple

# Type aliases
DomainID = NewType('DomainID', int)
ClassID = NewType('ClassID', int)
SampleID = NewType('SampleID', int)

# Channel-first image shape (channels, height, width)
ImageShape = Tuple[int, int, int]

# RGB colour with components in [0, 1]
RGB = Tuple[float, float, float]


class Method(Enum):
    """Training methods supported by the trainer."""
    ERM = "erm"
    MODE_F = "mode_f"
    MODE_A = "mode_a"
    RANDOM_AUG = "random_aug"

    @property
    def explores(self) -> bool:
        """Whether the method runs the inner maximization."""
        return self is not Method.ERM


class Mechanism(Enum):
    """Causal mechanisms used to generate augmented samples."""
    FOURIER = "fourier"
    FEATSTATS = "featstats"


class ProviderPolicy(Enum):
    """How style providers are picked for each explored sample."""
    BATCH_UNIFORM = "batch_uniform"
    ONE_PER_DOMAIN = "one_per_domain"
    FIXED = "fixed"


class BackgroundKind(Enum):
    """Background styles available to a synthetic domain."""
    SOLID = "solid"
    STRIPES = "stripes"
    CHECKER = "checker"
    NOISE = "noise"


class Split(Enum):
    """Dataset splits stored per domain."""
    TRAIN = "train"
    VAL = "val"
