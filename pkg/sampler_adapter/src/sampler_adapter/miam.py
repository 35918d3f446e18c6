"""Reader/writer for the audit toolkit's binary matrix format.

Layout: magic `MIAM`, u32 version=1, u64 rows, u64 cols, u8 dtype code
(1=f32, 2=f64), all little-endian, then the row-major payload. The format is
the only contract shared with the toolkit; both sides implement it
independently.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MIAM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQB")

_DTYPE_CODES = {"f32": (1, np.dtype("<f4")), "f64": (2, np.dtype("<f8"))}


class ExportError(Exception):
    """Raised when an export cannot produce a valid matrix file."""


def write_matrix(matrix: np.ndarray, path: str | Path, dtype: str = "f64") -> None:
    """Write one 2-D matrix to `path` in the toolkit's binary format."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.size == 0:
        raise ExportError("refusing to write an empty matrix")
    if not np.all(np.isfinite(matrix)):
        raise ExportError("matrix contains non-finite values")
    try:
        code, np_dtype = _DTYPE_CODES[dtype]
    except KeyError:
        raise ExportError(f"unknown payload dtype {dtype!r}") from None
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, rows, cols, code))
        fh.write(np.ascontiguousarray(matrix, dtype=np_dtype).tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read one matrix written in the toolkit's binary format."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise ExportError(f"{path}: file too short for a matrix header")
        magic, version, rows, cols, code = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ExportError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ExportError(f"{path}: unsupported format version {version}")
        np_dtype = next((d for c, d in _DTYPE_CODES.values() if c == code), None)
        if np_dtype is None:
            raise ExportError(f"{path}: unknown dtype code {code}")
        payload = fh.read(rows * cols * np_dtype.itemsize)
        if len(payload) < rows * cols * np_dtype.itemsize:
            raise ExportError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype=np_dtype).reshape(rows, cols).astype(np.float64)
