"""
Binary tensor container and dataset manifest.

Container layout (all integers little-endian)::

    b"MDTS" | u32 version | u8 dtype code | u8 ndim | ndim x u64 extents | payload

dtype codes: 1 = f32, 2 = u32, 3 = f64.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from modedg.utils.errors import DatasetFormatError

MAGIC = b"MDTS"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<u4"), 3: np.dtype("<f8")}
CODES = {dtype: code for code, dtype in DTYPES.items()}

_PREFIX = struct.Struct("<4sIBB")

MANIFEST_FIELDS = ("name", "classes", "image_shape", "seed", "domains", "files")
FILE_FIELDS = ("domain", "split", "images", "labels", "count")


def encode_tensor(array: np.ndarray, code: int) -> bytes:
    """Serialize an array with the given dtype code."""
    if code not in DTYPES:
        raise DatasetFormatError(f"unknown dtype code {code}", field="dtype")
    data = np.ascontiguousarray(array, dtype=DTYPES[code])
    header = _PREFIX.pack(MAGIC, VERSION, code, data.ndim)
    extents = struct.pack(f"<{data.ndim}Q", *data.shape)
    return header + extents + data.tobytes()


def decode_tensor(blob: bytes) -> np.ndarray:
    """
    Parse a serialized array.

    Raises:
        DatasetFormatError: On a bad magic, version, dtype, truncated header or
            a payload whose length disagrees with the extents
    """
    if len(blob) < _PREFIX.size:
        raise DatasetFormatError("container shorter than its header", field="header")
    magic, version, code, ndim = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}", field="magic")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}", field="version")
    if code not in DTYPES:
        raise DatasetFormatError(f"unknown dtype code {code}", field="dtype")
    offset = _PREFIX.size
    if len(blob) < offset + 8 * ndim:
        raise DatasetFormatError("container truncated inside extents", field="extents")
    shape = struct.unpack_from(f"<{ndim}Q", blob, offset)
    offset += 8 * ndim
    dtype = DTYPES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(blob) - offset != expected:
        raise DatasetFormatError(
            f"payload holds {len(blob) - offset} bytes, extents {shape} need {expected}",
            field="payload"
        )
    return np.frombuffer(blob, dtype=dtype, offset=offset).reshape(shape).copy()


def write_tensor(path: Union[str, Path], array: np.ndarray, code: int) -> Path:
    path = Path(path)
    path.write_bytes(encode_tensor(array, code))
    return path


def read_tensor(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise DatasetFormatError(f"tensor file {path} is missing", field="files") from None
    return decode_tensor(blob)


def write_manifest(path: Union[str, Path], manifest: Dict[str, Any]) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return path


def read_manifest(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load and structurally check a manifest.

    Raises:
        DatasetFormatError: If the document is not JSON or misses a field
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"manifest is not valid JSON: {exc}", field="manifest") from None
    for key in MANIFEST_FIELDS:
        if key not in manifest:
            raise DatasetFormatError("manifest is missing a field", field=key)
    for entry in manifest["files"]:
        for key in FILE_FIELDS:
            if key not in entry:
                raise DatasetFormatError("file entry is missing a field", field=f"files.{key}")
    return manifest
