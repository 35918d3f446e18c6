"""Data model and file I/O for audit records, generator samples, scores and reports.

Working precision is float64 throughout; file payloads may be float32 or
float64 (dtype byte in the header). Non-finite values are rejected at ingest.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import (
    DataError,
    DuplicateIdError,
    EmptyMatrixError,
    FormatError,
    IoError,
    TruncationError,
)

MAGIC = b"MIAM"
FORMAT_VERSION = 1

# magic, version, rows, cols, dtype code; little-endian, no padding
_HEADER = struct.Struct("<4sIQQB")
HEADER_SIZE = _HEADER.size  # 25 bytes

_CODE_TO_DTYPE = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_NAME_TO_CODE = {"f32": 1, "f64": 2}


class Origin(Enum):
    CLAIMED_TRAIN = "claimed-train"
    CLAIMED_TEST = "claimed-test"
    UNLABELED = "unlabeled"


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contains non-finite values")


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RecordSet:
    """Labeled matrix of candidate records (rows = records)."""

    ids: tuple[str, ...]
    data: np.ndarray
    origin_tag: Origin = Origin.UNLABELED

    def __post_init__(self):
        data = _freeze(np.atleast_2d(self.data))
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        if len(set(self.ids)) != len(self.ids):
            raise DuplicateIdError("record ids are not unique")
        if len(self.ids) != data.shape[0]:
            raise DataError(
                f"{len(self.ids)} ids for {data.shape[0]} rows"
            )
        _check_finite(data, "record matrix")

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SampleMatrix:
    """Generator samples in raw feature space (rows = samples)."""

    data: np.ndarray
    source_note: str = ""

    def __post_init__(self):
        data = _freeze(np.atleast_2d(self.data))
        object.__setattr__(self, "data", data)
        _check_finite(data, "sample matrix")

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class ReconstructionBatch:
    """A batch of reconstructions targeting a single record."""

    record_id: str
    reconstructions: np.ndarray

    def __post_init__(self):
        recs = _freeze(np.atleast_2d(self.reconstructions))
        object.__setattr__(self, "reconstructions", recs)
        if recs.shape[0] < 1:
            raise DataError("reconstruction batch must have at least one row")
        _check_finite(recs, "reconstruction batch")


@dataclass(frozen=True)
class ScoreVector:
    """Per-record scores produced by an attack; higher means more member-like."""

    entries: tuple[tuple[str, float], ...]
    attack_name: str = ""
    config_digest: str = ""

    def __post_init__(self):
        entries = tuple((str(i), float(s)) for i, s in self.entries)
        object.__setattr__(self, "entries", entries)
        ids = [i for i, _ in entries]
        if len(set(ids)) != len(ids):
            raise DuplicateIdError("score vector ids are not unique")
        for i, s in entries:
            if not np.isfinite(s):
                raise DataError(f"non-finite score for record {i!r}")

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TrialReport:
    """Outcome of one single/set membership-inference trial."""

    trial_seed: int
    single_accuracy: float
    set_correct: bool | None
    chosen_ids: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.single_accuracy <= 1.0:
            raise DataError("single_accuracy must lie in [0, 1]")
        object.__setattr__(self, "chosen_ids", tuple(self.chosen_ids))


# ---------------------------------------------------------------------------
# Matrix file format: MIAM magic, u32 version, u64 rows, u64 cols, u8 dtype
# (1=f32, 2=f64), little-endian, row-major payload. Files with a .csv suffix
# use the headerless comma-separated fallback instead.
# ---------------------------------------------------------------------------


def write_matrix_block(matrix: np.ndarray, fh: BinaryIO, dtype: str = "f64") -> None:
    """Append one binary matrix block to an open file handle."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.size == 0:
        raise EmptyMatrixError("refusing to write an empty matrix")
    _check_finite(matrix, "matrix")
    code = _NAME_TO_CODE.get(dtype)
    if code is None:
        raise DataError(f"unknown payload dtype {dtype!r}")
    rows, cols = matrix.shape
    fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, rows, cols, code))
    fh.write(np.ascontiguousarray(matrix, dtype=_CODE_TO_DTYPE[code]).tobytes())


def read_matrix_block(fh: BinaryIO) -> np.ndarray:
    """Read one binary matrix block from an open file handle."""
    header = fh.read(HEADER_SIZE)
    if len(header) < HEADER_SIZE:
        raise TruncationError("file too short for a matrix header")
    magic, version, rows, cols, code = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    dtype = _CODE_TO_DTYPE.get(code)
    if dtype is None:
        raise FormatError(f"unknown dtype code {code}")
    nbytes = rows * cols * dtype.itemsize
    payload = fh.read(nbytes)
    if len(payload) < nbytes:
        raise TruncationError(
            f"payload truncated: expected {nbytes} bytes, got {len(payload)}"
        )
    matrix = np.frombuffer(payload, dtype=dtype).reshape(rows, cols)
    matrix = matrix.astype(np.float64)
    _check_finite(matrix, "matrix payload")
    return matrix


def write_matrix(matrix: np.ndarray, path: str | Path, dtype: str = "f64") -> None:
    """Write a matrix to `path`; .csv paths get the headerless CSV fallback."""
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.size == 0:
        raise EmptyMatrixError("refusing to write an empty matrix")
    _check_finite(matrix, "matrix")
    try:
        if path.suffix.lower() == ".csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerows([repr(float(v)) for v in row] for row in matrix)
        else:
            with open(path, "wb") as fh:
                write_matrix_block(matrix, fh, dtype=dtype)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a matrix written by `write_matrix` (binary or .csv fallback)."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            rows = []
            with open(path, newline="") as fh:
                for lineno, line in enumerate(csv.reader(fh), start=1):
                    if not line:
                        continue
                    try:
                        rows.append([float(v) for v in line])
                    except ValueError as exc:
                        raise DataError(f"{path}:{lineno}: {exc}") from exc
            if not rows:
                raise TruncationError(f"{path} contains no rows")
            width = len(rows[0])
            if any(len(r) != width for r in rows):
                raise DataError(f"{path}: ragged rows")
            matrix = np.array(rows, dtype=np.float64)
            _check_finite(matrix, "matrix payload")
            return matrix
        with open(path, "rb") as fh:
            return read_matrix_block(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Score CSV: header `record_id,score`
# ---------------------------------------------------------------------------


def write_scores(scores: ScoreVector, path: str | Path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["record_id", "score"])
            for rid, val in scores.entries:
                writer.writerow([rid, repr(val)])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_scores(path: str | Path, attack_name: str = "", config_digest: str = "") -> ScoreVector:
    """Read a `record_id,score` CSV into a ScoreVector."""
    entries: list[tuple[str, float]] = []
    seen: set[str] = set()
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["record_id", "score"]:
                raise FormatError(f"{path}: expected header 'record_id,score'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2:
                    raise DataError(f"{path}:{lineno}: expected two columns")
                rid = row[0]
                if rid in seen:
                    raise DuplicateIdError(f"{path}:{lineno}: duplicate id {rid!r}")
                seen.add(rid)
                try:
                    val = float(row[1])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
                if not np.isfinite(val):
                    raise DataError(f"{path}:{lineno}: non-finite score for {rid!r}")
                entries.append((rid, val))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return ScoreVector(tuple(entries), attack_name=attack_name, config_digest=config_digest)
