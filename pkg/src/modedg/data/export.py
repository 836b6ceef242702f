"""
Plain-text PPM export for looking at samples.
"""
from pathlib import Path
from typing import List, Union

import numpy as np

from modedg.utils.errors import ShapeError
from modedg.utils.types import Split

from .dataset import DomainDataset


def write_ppm(path: Union[str, Path], image: np.ndarray) -> Path:
    """Write a ``[3, h, w]`` image in [0, 1] as an ASCII (P3) PPM."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"PPM export expects [3, h, w], got {image.shape}")
    _, h, w = image.shape
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.int64).transpose(1, 2, 0)
    lines = ["P3", f"{w} {h}", "255"]
    lines.extend(" ".join(str(v) for v in row.reshape(-1)) for row in pixels)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def write_ppm_grid(path: Union[str, Path], images: np.ndarray, pad: int = 1) -> Path:
    """
    Tile ``[rows, cols, 3, h, w]`` images into one PPM with white gutters.

    Raises:
        ShapeError: If the array is not a grid of RGB images
    """
    images = np.asarray(images)
    if images.ndim != 5 or images.shape[2] != 3:
        raise ShapeError(f"PPM grid expects [rows, cols, 3, h, w], got {images.shape}")
    rows, cols, _, h, w = images.shape
    canvas = np.ones((3, pad + rows * (h + pad), pad + cols * (w + pad)))
    for r in range(rows):
        for c in range(cols):
            top, left = pad + r * (h + pad), pad + c * (w + pad)
            canvas[:, top:top + h, left:left + w] = images[r, c]
    return write_ppm(path, canvas)


def export_samples(dataset: DomainDataset, out_dir: Union[str, Path], split: Split = Split.TRAIN) -> List[Path]:
    """Write the first sample of every (domain, class) cell."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for spec in dataset.domains:
        part = dataset.split(spec.domain_id, split)
        for class_id in range(dataset.classes):
            positions = np.flatnonzero(part.labels == class_id)
            if len(positions) == 0:
                continue
            written.append(write_ppm(out / f"{spec.name}_class{class_id}.ppm", part.images[positions[0]]))
    return written
