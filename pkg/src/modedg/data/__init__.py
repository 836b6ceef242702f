"""
Procedurally generated multi-domain digit images.
"""

from .glyphs import GLYPHS, NUM_GLYPHS, glyph_bitmap, glyph_mask
from .domains import DatasetRequest, DomainSpec, default_domains, load_request
from .render import box_blur, render_background, render_sample
from .storage import decode_tensor, encode_tensor, read_manifest, read_tensor, write_manifest, write_tensor
from .dataset import (
    MANIFEST_NAME,
    DomainDataset,
    SampleSet,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from .export import export_samples, write_ppm, write_ppm_grid

__all__ = [
    # Glyphs
    "GLYPHS",
    "NUM_GLYPHS",
    "glyph_bitmap",
    "glyph_mask",

    # Domains
    "DomainSpec",
    "DatasetRequest",
    "default_domains",
    "load_request",

    # Rendering
    "render_sample",
    "render_background",
    "box_blur",

    # Storage
    "encode_tensor",
    "decode_tensor",
    "write_tensor",
    "read_tensor",
    "write_manifest",
    "read_manifest",

    # Datasets
    "MANIFEST_NAME",
    "SampleSet",
    "DomainDataset",
    "generate_dataset",
    "save_dataset",
    "load_dataset",

    # Export
    "write_ppm",
    "write_ppm_grid",
    "export_samples",
]
