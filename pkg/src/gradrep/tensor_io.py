"""Reading and writing feature-map tensor files.

A feature map is a (channels, height, width) array of little-endian
32-bit floats stored in the NPY version 1.0 container: the 6 magic
bytes ``\\x93NUMPY``, version bytes, a header declaring ``<f4`` dtype,
C order and the 3-d shape, then the raw payload. Files written by any
standard array-dump implementation with these properties load here
unchanged, which is what lets the offline extractor emit them natively.
"""

from __future__ import annotations

import ast
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import DataError, FormatError

MAGIC = b"\x93NUMPY"
_DTYPE = np.dtype("<f4")


def write_tensor(fp: BinaryIO, array: np.ndarray) -> None:
    """Write a (C, H, W) float32 array to an open binary stream."""
    arr = np.ascontiguousarray(array, dtype=_DTYPE)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ValueError(f"feature map must be 3-d with positive dims, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError("refusing to write non-finite feature map")
    np.lib.format.write_array(fp, arr, version=(1, 0))


def write_tensor_file(path: str | Path, array: np.ndarray) -> None:
    with open(path, "wb") as fp:
        write_tensor(fp, array)


def _read_header(fp: BinaryIO, path: str | Path) -> tuple[int, int, int]:
    start = fp.read(8)
    if len(start) < 8 or start[:6] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes")
    if start[6:8] != b"\x01\x00":
        raise FormatError(f"{path}: unsupported format version {start[6]}.{start[7]}")
    raw_len = fp.read(2)
    if len(raw_len) < 2:
        raise FormatError(f"{path}: truncated header length")
    header_len = int.from_bytes(raw_len, "little")
    header = fp.read(header_len)
    if len(header) < header_len:
        raise FormatError(f"{path}: truncated header")
    try:
        meta = ast.literal_eval(header.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: unparseable header") from exc
    if not isinstance(meta, dict):
        raise FormatError(f"{path}: header is not a dict")
    descr = meta.get("descr")
    if descr != "<f4":
        raise FormatError(f"{path}: dtype must be little-endian float32, got {descr!r}")
    if meta.get("fortran_order") is not False:
        raise FormatError(f"{path}: payload must be C-ordered")
    shape = meta.get("shape")
    if (
        not isinstance(shape, tuple)
        or len(shape) != 3
        or not all(isinstance(n, int) and n > 0 for n in shape)
    ):
        raise FormatError(f"{path}: shape must be 3-d with positive dims, got {shape!r}")
    return shape


def read_tensor_file(path: str | Path) -> np.ndarray:
    """Load a (C, H, W) float32 feature map, validating format and payload."""
    with open(path, "rb") as fp:
        shape = _read_header(fp, path)
        count = shape[0] * shape[1] * shape[2]
        payload = fp.read()
    if len(payload) != count * _DTYPE.itemsize:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {count * _DTYPE.itemsize}"
        )
    data = np.frombuffer(payload, dtype=_DTYPE).reshape(shape)
    if not np.isfinite(data).all():
        raise DataError(f"{path}: payload contains non-finite values")
    return data.copy()
