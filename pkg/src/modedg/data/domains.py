"""
Domain style specifications and dataset generation requests.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import yaml

from modedg.fourier import is_power_of_two
from modedg.utils.errors import ConfigurationError
from modedg.utils.types import RGB, BackgroundKind, DomainID

from .glyphs import NUM_GLYPHS


def _check_palette(name: str, palette: List[RGB]) -> None:
    if not palette:
        raise ConfigurationError(f"{name} must not be empty")
    for colour in palette:
        if len(colour) != 3 or any(not 0.0 <= c <= 1.0 for c in colour):
            raise ConfigurationError(f"{name} entries must be RGB triples in [0, 1], got {colour}")


@dataclass
class DomainSpec:
    """Rendering style of one synthetic domain."""
    domain_id: DomainID
    name: str
    background: BackgroundKind = BackgroundKind.SOLID
    background_palette: List[RGB] = field(default_factory=lambda: [(0.0, 0.0, 0.0)])
    foreground_palette: List[RGB] = field(default_factory=lambda: [(1.0, 1.0, 1.0)])
    period: int = 4
    noise_amplitude: float = 0.0
    blur_radius: int = 0

    def __post_init__(self):
        self.background = BackgroundKind(self.background)
        self.background_palette = [tuple(float(c) for c in rgb) for rgb in self.background_palette]
        self.foreground_palette = [tuple(float(c) for c in rgb) for rgb in self.foreground_palette]

    def validate(self) -> None:
        _check_palette("background_palette", self.background_palette)
        _check_palette("foreground_palette", self.foreground_palette)
        if self.period < 2:
            raise ConfigurationError(f"period must be >= 2, got {self.period}")
        if not 0.0 <= self.noise_amplitude <= 1.0:
            raise ConfigurationError(f"noise_amplitude must be in [0, 1], got {self.noise_amplitude}")
        if self.blur_radius < 0:
            raise ConfigurationError(f"blur_radius must be >= 0, got {self.blur_radius}")

    def style_dict(self) -> Dict[str, Any]:
        return {
            'background': self.background.value,
            'background_palette': [list(c) for c in self.background_palette],
            'foreground_palette': [list(c) for c in self.foreground_palette],
            'period': self.period,
            'noise_amplitude': self.noise_amplitude,
            'blur_radius': self.blur_radius,
        }

    def to_dict(self) -> Dict[str, Any]:
        """Manifest form ``{id, name, style}``."""
        return {'id': int(self.domain_id), 'name': self.name, 'style': self.style_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DomainSpec":
        return cls(domain_id=DomainID(int(data['id'])), name=data['name'], **data.get('style', {}))


def default_domains() -> List[DomainSpec]:
    """Four visually distinct styles: solid, stripes, checker and speckle backgrounds."""
    return [
        DomainSpec(
            domain_id=DomainID(0), name="solid",
            background=BackgroundKind.SOLID,
            background_palette=[(0.05, 0.05, 0.1), (0.15, 0.1, 0.05), (0.1, 0.2, 0.1)],
            foreground_palette=[(0.95, 0.95, 0.95), (0.95, 0.85, 0.3)],
            noise_amplitude=0.02,
        ),
        DomainSpec(
            domain_id=DomainID(1), name="stripes",
            background=BackgroundKind.STRIPES,
            background_palette=[(0.8, 0.3, 0.3), (0.3, 0.3, 0.8), (0.9, 0.9, 0.5)],
            foreground_palette=[(0.05, 0.05, 0.05), (0.1, 0.4, 0.1)],
            period=4, noise_amplitude=0.05,
        ),
        DomainSpec(
            domain_id=DomainID(2), name="checker",
            background=BackgroundKind.CHECKER,
            background_palette=[(0.6, 0.6, 0.6), (0.3, 0.5, 0.7), (0.7, 0.5, 0.3)],
            foreground_palette=[(0.9, 0.1, 0.1), (0.1, 0.1, 0.6)],
            period=6, noise_amplitude=0.03, blur_radius=1,
        ),
        DomainSpec(
            domain_id=DomainID(3), name="speckle",
            background=BackgroundKind.NOISE,
            background_palette=[(0.2, 0.6, 0.6), (0.5, 0.2, 0.5), (0.4, 0.4, 0.1)],
            foreground_palette=[(1.0, 1.0, 0.0), (0.0, 1.0, 1.0)],
            noise_amplitude=0.1,
        ),
    ]


@dataclass
class DatasetRequest:
    """Everything needed to generate a dataset deterministically."""
    name: str = "synthetic-digits"
    classes: int = 10
    images_per_class: int = 600
    image_size: int = 32
    val_fraction: float = 0.2
    seed: int = 0
    domains: List[DomainSpec] = field(default_factory=default_domains)

    def __post_init__(self):
        self.domains = [d if isinstance(d, DomainSpec) else DomainSpec.from_dict(d) for d in self.domains]

    @classmethod
    def create_default(cls) -> "DatasetRequest":
        """4 domains x 10 classes x 600 images of 32x32 pixels."""
        return cls()

    @property
    def train_per_class(self) -> int:
        return int(round(self.images_per_class * (1.0 - self.val_fraction)))

    def validate(self) -> None:
        """
        Raises:
            ConfigurationError: If the request cannot produce a usable dataset
        """
        if len(self.domains) < 3:
            raise ConfigurationError(f"at least 3 domains are required, got {len(self.domains)}")
        if not 2 <= self.classes <= NUM_GLYPHS:
            raise ConfigurationError(f"classes must be in [2, {NUM_GLYPHS}], got {self.classes}")
        if not is_power_of_two(self.image_size) or self.image_size < 8:
            raise ConfigurationError(f"image_size must be a power of two >= 8, got {self.image_size}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigurationError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if not 1 <= self.train_per_class < self.images_per_class:
            raise ConfigurationError(
                f"{self.images_per_class} images per class leave an empty split at "
                f"val_fraction={self.val_fraction}"
            )
        ids = [int(d.domain_id) for d in self.domains]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"domain ids must be unique, got {ids}")
        for domain in self.domains:
            domain.validate()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'classes': self.classes,
            'images_per_class': self.images_per_class,
            'image_size': self.image_size,
            'val_fraction': self.val_fraction,
            'seed': self.seed,
            'domains': [d.to_dict() for d in self.domains],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetRequest":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def load_request(path: Union[str, Path]) -> DatasetRequest:
    """Read a dataset request from JSON or YAML (JSON is valid YAML)."""
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    return DatasetRequest.from_dict(data)
