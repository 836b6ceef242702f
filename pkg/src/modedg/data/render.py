"""
Rendering of a class glyph under a domain style.

The glyph geometry is drawn first from the per-sample stream and never looks
at the domain, so the content of an image is independent of its style.
"""
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from modedg.utils.types import BackgroundKind, ClassID

from .domains import DomainSpec
from .glyphs import glyph_mask


def _pick(palette, rng: np.random.Generator) -> Tuple[int, np.ndarray]:
    index = int(rng.integers(len(palette)))
    return index, np.asarray(palette[index], dtype=np.float64)


def render_background(spec: DomainSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Background ``[3, size, size]`` for a domain."""
    index, base = _pick(spec.background_palette, rng)
    alt = np.asarray(spec.background_palette[(index + 1) % len(spec.background_palette)], dtype=np.float64)
    if np.array_equal(alt, base):
        alt = base * 0.5
    rows, cols = np.mgrid[0:size, 0:size]
    offset = int(rng.integers(spec.period))

    if spec.background is BackgroundKind.SOLID:
        weight = np.zeros((size, size))
    elif spec.background is BackgroundKind.STRIPES:
        vertical = bool(rng.integers(2))
        coord = cols if vertical else rows
        weight = (((coord + offset) // max(spec.period // 2, 1)) % 2).astype(np.float64)
    elif spec.background is BackgroundKind.CHECKER:
        half = max(spec.period // 2, 1)
        weight = ((((rows + offset) // half) + ((cols + offset) // half)) % 2).astype(np.float64)
    else:
        weight = rng.random((size, size))
    return base[:, None, None] + (alt - base)[:, None, None] * weight[None]


def box_blur(image: np.ndarray, radius: int) -> np.ndarray:
    """Mean filter over a (2r+1) square window with edge replication."""
    if radius <= 0:
        return image
    width = 2 * radius + 1
    padded = np.pad(image, ((0, 0), (radius, radius), (radius, radius)), mode="edge")
    return sliding_window_view(padded, (width, width), axis=(1, 2)).mean(axis=(-2, -1))


def render_sample(
    class_id: ClassID,
    spec: DomainSpec,
    instance_rng: np.random.Generator,
    size: int = 32
) -> np.ndarray:
    """
    Render one image.

    Args:
        class_id: Digit class
        spec: Domain style
        instance_rng: Per-sample random stream
        size: Image side in pixels

    Returns:
        Image ``[3, size, size]`` with pixels in [0, 1]

    Raises:
        ConfigurationError: If the class id has no glyph
    """
    mask = glyph_mask(class_id, instance_rng, size)
    background = render_background(spec, instance_rng, size)
    _, foreground = _pick(spec.foreground_palette, instance_rng)

    image = np.where(mask[None], foreground[:, None, None], background)
    if spec.noise_amplitude > 0:
        image = image + spec.noise_amplitude * instance_rng.uniform(-1.0, 1.0, size=image.shape)
    image = box_blur(image, spec.blur_radius)
    return np.clip(image, 0.0, 1.0)
