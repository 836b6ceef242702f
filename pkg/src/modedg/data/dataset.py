"""
In-memory multi-domain datasets and their on-disk form.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import numpy as np
from loguru import logger
from tqdm import tqdm

from modedg.utils.errors import ConfigurationError, DatasetFormatError
from modedg.utils.rng import derive_rng
from modedg.utils.types import DomainID, ImageShape, Split

from .domains import DatasetRequest, DomainSpec
from .render import render_sample
from .storage import read_manifest, read_tensor, write_manifest, write_tensor

MANIFEST_NAME = "manifest.json"


@dataclass
class SampleSet:
    """Images with their labels and domain ids."""
    images: np.ndarray
    labels: np.ndarray
    domain_ids: np.ndarray

    def __post_init__(self):
        if not len(self.images) == len(self.labels) == len(self.domain_ids):
            raise ConfigurationError(
                f"sample set lengths differ: {len(self.images)}, {len(self.labels)}, {len(self.domain_ids)}"
            )

    def __len__(self) -> int:
        return len(self.labels)

    def batch(self, indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Float64 images, labels and domain ids at the given positions."""
        return (
            self.images[indices].astype(np.float64),
            self.labels[indices].astype(np.int64),
            self.domain_ids[indices].astype(np.int64),
        )

    @classmethod
    def concatenate(cls, parts: Iterable["SampleSet"]) -> "SampleSet":
        parts = list(parts)
        if not parts:
            raise ConfigurationError("no sample sets to concatenate")
        return cls(
            np.concatenate([p.images for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.domain_ids for p in parts]),
        )


class DomainDataset:
    """
    Labeled images partitioned by domain and split.

    Images are stored as float32 in [0, 1] and labels as uint32, the same
    representation the container files use.
    """

    def __init__(
        self,
        name: str,
        classes: int,
        image_shape: ImageShape,
        seed: int,
        domains: List[DomainSpec],
        parts: Dict[Tuple[int, Split], SampleSet]
    ):
        self.name = name
        self.classes = classes
        self.image_shape = tuple(image_shape)
        self.seed = seed
        self.domains = list(domains)
        self.parts = parts

    @property
    def domain_ids(self) -> List[DomainID]:
        return [d.domain_id for d in self.domains]

    def domain(self, domain_id: int) -> DomainSpec:
        for spec in self.domains:
            if int(spec.domain_id) == int(domain_id):
                return spec
        raise ConfigurationError(f"unknown domain {domain_id}")

    def split(self, domain_id: int, split: Split) -> SampleSet:
        """Samples of one domain and split."""
        key = (int(domain_id), Split(split))
        if key not in self.parts:
            raise ConfigurationError(f"dataset has no {Split(split).value} split for domain {domain_id}")
        return self.parts[key]

    def select(self, domain_ids: Iterable[int], split: Split) -> SampleSet:
        """Concatenate the samples of several domains in ascending domain order."""
        return SampleSet.concatenate(self.split(d, split) for d in sorted(int(d) for d in domain_ids))

    def counts(self) -> Dict[Tuple[int, str], int]:
        """Sample count per (domain, split name)."""
        return {(d, s.value): len(part) for (d, s), part in self.parts.items()}

    def file_stem(self, domain_id: int, split: Split) -> str:
        return f"{self.domain(domain_id).name}_{Split(split).value}"

    def to_manifest(self) -> Dict:
        files = []
        for spec in self.domains:
            for split in Split:
                stem = self.file_stem(spec.domain_id, split)
                files.append({
                    'domain': int(spec.domain_id),
                    'split': split.value,
                    'images': f"{stem}_images.mdts",
                    'labels': f"{stem}_labels.mdts",
                    'count': len(self.split(spec.domain_id, split)),
                })
        return {
            'name': self.name,
            'classes': self.classes,
            'image_shape': list(self.image_shape),
            'seed': self.seed,
            'domains': [spec.to_dict() for spec in self.domains],
            'files': files,
        }


def _render_cell(request: DatasetRequest, spec: DomainSpec, class_id: int) -> np.ndarray:
    images = np.empty((request.images_per_class, 3, request.image_size, request.image_size), dtype=np.float32)
    for i in range(request.images_per_class):
        rng = derive_rng(request.seed, int(spec.domain_id), class_id, i)
        images[i] = render_sample(class_id, spec, rng, request.image_size)
    return images


def generate_dataset(
    request: DatasetRequest,
    num_workers: int = 1,
    progress: bool = False
) -> DomainDataset:
    """
    Render every (domain, class) cell of a request.

    Each sample has its own stream derived from ``(seed, domain, class, index)``,
    so the result does not depend on ``num_workers``. The first
    ``train_per_class`` instances of each cell form the training split.

    Args:
        request: Dataset description
        num_workers: Threads used for rendering
        progress: Show a progress bar

    Returns:
        The generated dataset
    """
    request.validate()
    start = time.time()
    cells = [(spec, c) for spec in request.domains for c in range(request.classes)]

    if num_workers > 1:
        with ThreadPoolExecutor(max_workers=num_workers) as executor:
            rendered = list(tqdm(
                executor.map(lambda cell: _render_cell(request, *cell), cells),
                total=len(cells), desc="Rendering", disable=not progress
            ))
    else:
        rendered = [_render_cell(request, spec, c)
                    for spec, c in tqdm(cells, desc="Rendering", disable=not progress)]

    n_train = request.train_per_class
    parts: Dict[Tuple[int, Split], SampleSet] = {}
    for spec in request.domains:
        blocks = [img for (s, _), img in zip(cells, rendered) if s is spec]
        for split, window in ((Split.TRAIN, slice(0, n_train)), (Split.VAL, slice(n_train, None))):
            images = np.concatenate([b[window] for b in blocks])
            labels = np.concatenate([
                np.full(len(b[window]), c, dtype=np.uint32) for c, b in enumerate(blocks)
            ])
            parts[(int(spec.domain_id), split)] = SampleSet(
                images, labels, np.full(len(labels), int(spec.domain_id), dtype=np.uint32)
            )

    dataset = DomainDataset(
        name=request.name,
        classes=request.classes,
        image_shape=(3, request.image_size, request.image_size),
        seed=request.seed,
        domains=request.domains,
        parts=parts,
    )
    logger.info(
        f"Generated {sum(len(p) for p in parts.values())} images over "
        f"{len(request.domains)} domains in {time.time() - start:.1f}s"
    )
    return dataset


def save_dataset(dataset: DomainDataset, path: Union[str, Path]) -> Path:
    """Write the manifest and one image/label container pair per (domain, split)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = dataset.to_manifest()
    for entry in manifest['files']:
        part = dataset.split(entry['domain'], Split(entry['split']))
        write_tensor(root / entry['images'], part.images, code=1)
        write_tensor(root / entry['labels'], part.labels, code=2)
    write_manifest(root / MANIFEST_NAME, manifest)
    logger.info(f"Dataset '{dataset.name}' written to {root}")
    return root


def load_dataset(path: Union[str, Path]) -> DomainDataset:
    """
    Read a dataset written by :func:`save_dataset`.

    Raises:
        DatasetFormatError: If the manifest and the container files disagree
    """
    root = Path(path)
    manifest = read_manifest(root / MANIFEST_NAME)
    domains = [DomainSpec.from_dict(d) for d in manifest['domains']]
    known = {int(d.domain_id) for d in domains}
    image_shape = tuple(int(e) for e in manifest['image_shape'])

    parts: Dict[Tuple[int, Split], SampleSet] = {}
    for entry in manifest['files']:
        domain_id = int(entry['domain'])
        if domain_id not in known:
            raise DatasetFormatError(f"file entry for undeclared domain {domain_id}", field="files.domain")
        try:
            split = Split(entry['split'])
        except ValueError:
            raise DatasetFormatError(f"unknown split {entry['split']!r}", field="files.split") from None
        images = read_tensor(root / entry['images'])
        labels = read_tensor(root / entry['labels'])
        if images.dtype != np.float32 or labels.dtype != np.uint32:
            raise DatasetFormatError(f"unexpected dtypes in {entry['images']}", field="dtype")
        if images.shape[1:] != image_shape:
            raise DatasetFormatError(
                f"{entry['images']} holds images of shape {images.shape[1:]}, manifest says {image_shape}",
                field="image_shape"
            )
        if not len(images) == len(labels) == int(entry['count']):
            raise DatasetFormatError(
                f"{entry['images']}: {len(images)} images, {len(labels)} labels, manifest count {entry['count']}",
                field="count"
            )
        parts[(domain_id, split)] = SampleSet(images, labels, np.full(len(labels), domain_id, dtype=np.uint32))

    missing = [(d, s.value) for d in sorted(known) for s in Split if (d, s) not in parts]
    if missing:
        raise DatasetFormatError(f"manifest domains without files: {missing}", field="files")

    return DomainDataset(
        name=manifest['name'],
        classes=int(manifest['classes']),
        image_shape=image_shape,
        seed=int(manifest['seed']),
        domains=domains,
        parts=parts,
    )
