"""Record-to-sample distance kernels: the hot loop of the Monte Carlo attack.

Samples are streamed in fixed-width tiles so that n=10^6 samples never
require materializing the full records-by-samples distance matrix. Tile
boundaries are constants (not derived from the thread count), so results are
bit-identical across thread counts and across memory budgets at or above the
default; per-record log accumulators are reduced once over terms collected in
sample order, so chunked streaming matches a single pass exactly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimError
from .features import (
    ChistParams,
    HogParams,
    PcaModel,
    chist_features,
    hog_features,
    pca_transform,
)

DEFAULT_MEM_BUDGET = 256 * 1024**2  # bytes of scratch per worker

# Fixed tiling of the records x samples plane. Keeping these constant (rather
# than deriving them from threads or budget) pins the floating-point result:
# BLAS products are only reproducible for identical operand shapes.
RECORD_TILE = 512
SAMPLE_TILE = 16384


@dataclass(frozen=True)
class DistanceSpec:
    """Which feature space Euclidean distances are measured in.

    kind is one of {"raw", "pca", "hog", "chist"}; the matching params field
    must be set for the non-raw kinds.
    """

    kind: str = "raw"
    pca_model: PcaModel | None = None
    hog_params: HogParams | None = None
    chist_params: ChistParams | None = None
    note: str = ""

    def __post_init__(self):
        if self.kind not in ("raw", "pca", "hog", "chist"):
            raise DimError(f"unknown distance kind {self.kind!r}")
        if self.kind == "pca" and self.pca_model is None:
            raise DimError("pca distance requires a fitted PcaModel")
        if self.kind == "hog" and self.hog_params is None:
            raise DimError("hog distance requires HogParams")
        if self.kind == "chist" and self.chist_params is None:
            raise DimError("chist distance requires ChistParams")

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        """Map rows of a raw-space matrix into the distance feature space."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if self.kind == "raw":
            return matrix
        if self.kind == "pca":
            return pca_transform(self.pca_model, matrix)
        if self.kind == "hog":
            shape = self.hog_params.image_shape
            return np.stack(
                [hog_features(row.reshape(shape), self.hog_params) for row in matrix]
            )
        channels = self.chist_params.channels
        rows = []
        for row in matrix:
            side = int(round((row.size / channels) ** 0.5))
            if side * side * channels != row.size:
                raise DimError(
                    f"row of length {row.size} is not a square {channels}-channel image"
                )
            rows.append(
                chist_features(row.reshape(side, side, channels), self.chist_params)
            )
        return np.stack(rows)

    def describe(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.note:
            out["note"] = self.note
        if self.kind == "pca":
            out["k"] = self.pca_model.k
            out["whitened"] = self.pca_model.whitened
        elif self.kind == "hog":
            p = self.hog_params
            out.update(
                image_shape=list(p.image_shape),
                cell_size=p.cell_size,
                orientation_bins=p.orientation_bins,
                block_size=p.block_size,
            )
        elif self.kind == "chist":
            p = self.chist_params
            out.update(
                bins_per_channel=p.bins_per_channel,
                channels=p.channels,
                intensity_range=list(p.intensity_range),
            )
        return out


def _as_2d(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    if arr.ndim != 2:
        raise DimError(f"{name} must be a 2-D matrix")
    return arr


def _check_dims(records: np.ndarray, samples: np.ndarray) -> None:
    if records.shape[1] != samples.shape[1]:
        raise DimError(
            f"records have {records.shape[1]} features, samples {samples.shape[1]}"
        )


def _sample_tile(mem_budget: int) -> int:
    return max(1, min(SAMPLE_TILE, int(mem_budget // (8 * RECORD_TILE))))


def _resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("MIAUDIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _record_tiles(n_records: int) -> list[slice]:
    return [
        slice(start, min(start + RECORD_TILE, n_records))
        for start in range(0, n_records, RECORD_TILE)
    ]


def _sq_dists(recs: np.ndarray, rec_sq: np.ndarray, chunk: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances recs x chunk via the expanded product."""
    sq = rec_sq[:, None] + np.einsum("ij,ij->i", chunk, chunk)[None, :]
    sq -= 2.0 * (recs @ chunk.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def _run_tiles(run_tile, n_records: int, threads: int | None) -> None:
    tiles = _record_tiles(n_records)
    n_workers = min(_resolve_threads(threads), len(tiles))
    if n_workers <= 1:
        for tile in tiles:
            run_tile(tile)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run_tile, tiles))


def pairwise_min_distances(
    records: np.ndarray,
    samples: np.ndarray,
    mem_budget: int = DEFAULT_MEM_BUDGET,
    threads: int | None = None,
) -> np.ndarray:
    """Per-record minimum Euclidean distance to any sample."""
    records = _as_2d("records", records)
    samples = _as_2d("samples", samples)
    _check_dims(records, samples)
    step = _sample_tile(mem_budget)
    out = np.empty(records.shape[0])

    def run_tile(tile: slice) -> None:
        recs = records[tile]
        rec_sq = np.einsum("ij,ij->i", recs, recs)
        best = np.full(recs.shape[0], np.inf)
        for start in range(0, samples.shape[0], step):
            sq = _sq_dists(recs, rec_sq, samples[start : start + step])
            np.minimum(best, sq.min(axis=1), out=best)
        out[tile] = np.sqrt(best)

    _run_tiles(run_tile, records.shape[0], threads)
    return out


def neighborhood_stats(
    records: np.ndarray,
    samples: np.ndarray,
    epsilon: float,
    delta: float,
    mem_budget: int = DEFAULT_MEM_BUDGET,
    threads: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-record (count within epsilon, sum of ln(max(d, delta)) over those).

    Threshold tests run on squared distances; logs are taken on the true
    rooted distance. Both accumulators come out of the same streaming pass.
    """
    records = _as_2d("records", records)
    samples = _as_2d("samples", samples)
    _check_dims(records, samples)
    if epsilon < 0:
        raise DimError("epsilon must be non-negative")
    if delta <= 0:
        raise DimError("delta must be positive")
    step = _sample_tile(mem_budget)
    eps_sq = float(epsilon) * float(epsilon)
    counts = np.zeros(records.shape[0], dtype=np.int64)
    sum_logs = np.zeros(records.shape[0])

    def run_tile(tile: slice) -> None:
        recs = records[tile]
        rec_sq = np.einsum("ij,ij->i", recs, recs)
        tile_counts = np.zeros(recs.shape[0], dtype=np.int64)
        terms: list[list[np.ndarray]] = [[] for _ in range(recs.shape[0])]
        for start in range(0, samples.shape[0], step):
            sq = _sq_dists(recs, rec_sq, samples[start : start + step])
            mask = sq <= eps_sq
            tile_counts += mask.sum(axis=1)
            for i in np.nonzero(mask.any(axis=1))[0]:
                d = np.sqrt(sq[i, mask[i]])
                terms[i].append(np.log(np.maximum(d, delta)))
        counts[tile] = tile_counts
        for i, parts in enumerate(terms):
            if parts:
                sum_logs[tile.start + i] = float(np.add.reduce(np.concatenate(parts)))

    _run_tiles(run_tile, records.shape[0], threads)
    return counts, sum_logs


def pairwise_distance_chunks(
    records: np.ndarray,
    samples: np.ndarray,
    mem_budget: int = DEFAULT_MEM_BUDGET,
):
    """Yield flattened tiles of the full records x samples distance multiset."""
    records = _as_2d("records", records)
    samples = _as_2d("samples", samples)
    _check_dims(records, samples)
    step = _sample_tile(mem_budget)
    for tile in _record_tiles(records.shape[0]):
        recs = records[tile]
        rec_sq = np.einsum("ij,ij->i", recs, recs)
        for start in range(0, samples.shape[0], step):
            yield np.sqrt(_sq_dists(recs, rec_sq, samples[start : start + step])).ravel()
