"""
Built-in 5x7 bitmap digits and their jittered rasterization.
"""
import numpy as np

from modedg.utils.errors import ConfigurationError
from modedg.utils.types import ClassID

GLYPH_ROWS = 7
GLYPH_COLS = 5

_FONT = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}

GLYPHS = np.array(
    [[[c == "1" for c in row] for row in _FONT[digit]] for digit in range(10)],
    dtype=bool
)
NUM_GLYPHS = len(GLYPHS)

# Jitter ranges for a 32 pixel canvas; scale is pixels per glyph cell
SCALE_RANGE = (2.6, 3.4)
ROTATION_DEGREES = 12.0
SHIFT_FRACTION = 0.09


def glyph_bitmap(class_id: int) -> np.ndarray:
    """Return the 7x5 boolean bitmap of a digit."""
    if not 0 <= int(class_id) < NUM_GLYPHS:
        raise ConfigurationError(f"class id must be in [0, {NUM_GLYPHS}), got {class_id}")
    return GLYPHS[int(class_id)]


def glyph_mask(class_id: ClassID, rng: np.random.Generator, size: int = 32) -> np.ndarray:
    """
    Rasterize a randomly scaled, rotated and shifted digit.

    The four jitter draws (scale, angle, two shifts) are the first values
    taken from ``rng``, so the mask depends only on the class and the stream.

    Args:
        class_id: Digit to draw
        rng: Per-sample random stream
        size: Canvas side in pixels

    Returns:
        Boolean mask ``[size, size]``
    """
    bitmap = glyph_bitmap(class_id)
    scale = rng.uniform(*SCALE_RANGE) * size / 32.0
    angle = np.deg2rad(rng.uniform(-ROTATION_DEGREES, ROTATION_DEGREES))
    shift = rng.uniform(-SHIFT_FRACTION, SHIFT_FRACTION, size=2) * size

    # Inverse-map every pixel centre into glyph cell coordinates
    centre = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    dy = rows - centre - shift[0]
    dx = cols - centre - shift[1]
    cos, sin = np.cos(angle), np.sin(angle)
    gy = (cos * dy + sin * dx) / scale + GLYPH_ROWS / 2.0
    gx = (-sin * dy + cos * dx) / scale + GLYPH_COLS / 2.0
    iy = np.floor(gy).astype(np.int64)
    ix = np.floor(gx).astype(np.int64)
    inside = (iy >= 0) & (iy < GLYPH_ROWS) & (ix >= 0) & (ix < GLYPH_COLS)
    mask = np.zeros((size, size), dtype=bool)
    mask[inside] = bitmap[iy[inside], ix[inside]]
    return mask
