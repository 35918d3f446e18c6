"""Scoring functions for membership inference against generative models.

All attacks reduce to a per-record score where higher means "more likely a
training member": the two Monte Carlo estimators (count of samples inside an
epsilon-neighborhood, and negative log-distance mass of those samples), a
kernel density estimate baseline, a reconstruction-error score for
autoencoder-style models, and a passthrough for externally supplied scores
(e.g. discriminator outputs).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core_data import ReconstructionBatch, RecordSet, SampleMatrix, ScoreVector
from .distances import (
    DEFAULT_MEM_BUDGET,
    DistanceSpec,
    neighborhood_stats,
    pairwise_distance_chunks,
    pairwise_min_distances,
)
from .errors import (
    DimError,
    EmptyInputError,
    IdMismatchError,
    ImbalanceError,
    OracleError,
)

DEFAULT_DELTA = 1e-12

DistanceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EpsilonHeuristic:
    """How the neighborhood radius is resolved from the data.

    kind "median": median over records of the minimum record-to-sample
    distance. kind "percentile": nearest-rank quantile p of the full multiset
    of record-to-sample pairwise distances.
    """

    kind: str = "median"
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("median", "percentile"):
            raise DimError(f"unknown heuristic kind {self.kind!r}")
        if self.kind == "percentile":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise DimError("percentile heuristic needs p in (0, 1)")

    def describe(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "percentile":
            out["p"] = self.p
        return out


@dataclass(frozen=True)
class McConfig:
    distance: DistanceSpec = field(default_factory=DistanceSpec)
    heuristic: EpsilonHeuristic = field(default_factory=EpsilonHeuristic)
    n_samples: int = 10**6
    delta: float = DEFAULT_DELTA
    variant: str = "mc-d"
    mem_budget: int = DEFAULT_MEM_BUDGET
    threads: int | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise DimError("n_samples must be at least 1")
        if self.delta <= 0:
            raise DimError("delta must be positive")
        if self.variant not in ("mc-eps", "mc-d"):
            raise DimError(f"unknown MC variant {self.variant!r}")


@dataclass(frozen=True)
class KdeConfig:
    """Gaussian-kernel density estimate configuration.

    The default estimator keeps h^d inside the kernel argument as well as in
    the normalizer; set textbook=True for the usual form with h inside.
    """

    bandwidth: float | None = None  # None: Scott's rule on the sample matrix
    dimension: int = 1
    textbook: bool = False

    def __post_init__(self):
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise DimError("bandwidth must be positive")
        if self.dimension < 1:
            raise DimError("dimension must be at least 1")


def _euclid(x: np.ndarray, samples: np.ndarray) -> np.ndarray:
    diff = samples - x
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def epsilon_median(
    records: np.ndarray,
    samples: np.ndarray,
    mem_budget: int = DEFAULT_MEM_BUDGET,
    threads: int | None = None,
) -> float:
    """Median over records of the minimum record-to-sample distance."""
    records = np.atleast_2d(records)
    samples = np.atleast_2d(samples)
    if records.size == 0 or samples.size == 0:
        raise EmptyInputError("epsilon_median needs at least one record and sample")
    mins = pairwise_min_distances(records, samples, mem_budget=mem_budget, threads=threads)
    return float(np.median(mins))


def epsilon_percentile(
    records: np.ndarray,
    samples: np.ndarray,
    p: float,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> float:
    """Nearest-rank p-quantile of all record-to-sample pairwise distances.

    The quantile is the value at 1-based sorted index ceil(p * N) over the
    full multiset of N = records * samples distances, found by a streaming
    selection that never materializes (or sorts) the whole multiset.
    """
    records = np.atleast_2d(records)
    samples = np.atleast_2d(samples)
    if records.size == 0 or samples.size == 0:
        raise EmptyInputError("epsilon_percentile needs at least one record and sample")
    if not 0.0 < p < 1.0:
        raise DimError("p must lie in (0, 1)")
    total = records.shape[0] * samples.shape[0]
    rank = max(1, math.ceil(p * total))  # 1-based

    if rank <= total - rank + 1:
        # keep the `rank` smallest seen so far; answer is their maximum
        keep, side = rank, "low"
    else:
        keep, side = total - rank + 1, "high"

    buf = np.empty(0)
    for chunk in pairwise_distance_chunks(records, samples, mem_budget=mem_budget):
        merged = np.concatenate([buf, chunk])
        if merged.size <= keep:
            buf = merged
            continue
        if side == "low":
            buf = merged[np.argpartition(merged, keep - 1)[:keep]]
        else:
            buf = merged[np.argpartition(merged, merged.size - keep)[-keep:]]
    return float(buf.max() if side == "low" else buf.min())


def mc_epsilon_score(
    x: np.ndarray,
    samples: np.ndarray,
    epsilon: float,
    distance_fn: DistanceFn | None = None,
) -> float:
    """Fraction of samples inside the epsilon-neighborhood of x."""
    if epsilon < 0:
        raise DimError("epsilon must be non-negative")
    d = (distance_fn or _euclid)(np.asarray(x, dtype=np.float64), np.atleast_2d(samples))
    return float(np.count_nonzero(d <= epsilon) / d.size)


def mc_distance_score(
    x: np.ndarray,
    samples: np.ndarray,
    epsilon: float,
    delta: float = DEFAULT_DELTA,
    distance_fn: DistanceFn | None = None,
) -> float:
    """Negative mean log-distance over samples inside the epsilon-neighborhood.

    The mean divides by the total sample count n, not the within-epsilon
    count; distances are clipped below at delta before the log.
    """
    if epsilon < 0:
        raise DimError("epsilon must be non-negative")
    if delta <= 0:
        raise DimError("delta must be positive")
    d = (distance_fn or _euclid)(np.asarray(x, dtype=np.float64), np.atleast_2d(samples))
    inside = d[d <= epsilon]
    if inside.size == 0:
        return 0.0
    return float(-np.add.reduce(np.log(np.maximum(inside, delta))) / d.size)


def scott_bandwidth(samples: np.ndarray) -> float:
    """Scott's rule: n^(-1/(d+4)) scaled by the mean per-dimension std."""
    samples = np.atleast_2d(samples)
    n, d = samples.shape
    sigma = float(np.mean(np.std(samples, axis=0, ddof=1))) if n > 1 else 1.0
    if sigma <= 0:
        sigma = 1.0
    return sigma * n ** (-1.0 / (d + 4))


def kde_score(x: np.ndarray, samples: np.ndarray, config: KdeConfig) -> float:
    """Gaussian-kernel density estimate of the sample likelihood at x."""
    x = np.asarray(x, dtype=np.float64).ravel()
    samples = np.atleast_2d(samples)
    d = config.dimension
    if x.size != d or samples.shape[1] != d:
        raise DimError(f"inputs do not live in the declared {d}-dimensional space")
    h = config.bandwidth if config.bandwidth is not None else scott_bandwidth(samples)
    h_d = h**d
    scale = h if config.textbook else h_d
    u = (samples - x) / scale
    sq = np.einsum("ij,ij->i", u, u)
    kernel = (2.0 * np.pi) ** (-d / 2.0) * np.exp(-0.5 * sq)
    return float(np.add.reduce(kernel) / (samples.shape[0] * h_d))


def reconstruction_score(record_id: str, x: np.ndarray, batch: ReconstructionBatch) -> float:
    """Negative mean Euclidean reconstruction error for one record."""
    if batch.record_id != record_id:
        raise IdMismatchError(
            f"batch targets {batch.record_id!r}, expected {record_id!r}"
        )
    x = np.asarray(x, dtype=np.float64).ravel()
    if batch.reconstructions.shape[1] != x.size:
        raise DimError("reconstruction width does not match the record")
    diff = batch.reconstructions - x
    return float(-np.mean(np.sqrt(np.einsum("ij,ij->i", diff, diff))))


def _combine(train: RecordSet, test: RecordSet) -> tuple[list[str], np.ndarray]:
    if train.n_features != test.n_features:
        raise DimError("train and test record sets disagree on feature count")
    if len(train) != len(test):
        raise ImbalanceError(
            f"{len(train)} train vs {len(test)} test records; sets must be equal-size"
        )
    ids = list(train.ids) + list(test.ids)
    if len(set(ids)) != len(ids):
        raise IdMismatchError("train and test record ids overlap")
    return ids, np.vstack([train.data, test.data])


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True)
    return json.dumps(
        {**payload, "sha256": hashlib.sha256(blob.encode()).hexdigest()[:16]},
        sort_keys=True,
    )


def run_mc_attack(
    train: RecordSet,
    test: RecordSet,
    samples: SampleMatrix,
    config: McConfig,
) -> ScoreVector:
    """Score every audit record with the configured Monte Carlo variant.

    Both sides are mapped into the configured distance space, epsilon is
    resolved by the configured heuristic on the transformed data, and the
    resolved value is embedded in the score vector's config digest.
    """
    ids, raw_records = _combine(train, test)
    sample_data = samples.data
    if sample_data.shape[0] != config.n_samples:
        raise DimError(
            f"sample matrix has {sample_data.shape[0]} rows, config says {config.n_samples}"
        )
    records_t = config.distance.transform(raw_records)
    samples_t = config.distance.transform(sample_data)

    if config.heuristic.kind == "median":
        epsilon = epsilon_median(
            records_t, samples_t, mem_budget=config.mem_budget, threads=config.threads
        )
    else:
        epsilon = epsilon_percentile(
            records_t, samples_t, config.heuristic.p, mem_budget=config.mem_budget
        )

    counts, sum_logs = neighborhood_stats(
        records_t,
        samples_t,
        epsilon,
        config.delta,
        mem_budget=config.mem_budget,
        threads=config.threads,
    )
    n = sample_data.shape[0]
    if config.variant == "mc-eps":
        scores = counts / n
    else:
        scores = -sum_logs / n

    digest = _digest(
        {
            "attack": config.variant,
            "distance": config.distance.describe(),
            "heuristic": config.heuristic.describe(),
            "n_samples": n,
            "delta": config.delta,
            "resolved_epsilon": epsilon,
        }
    )
    return ScoreVector(
        tuple(zip(ids, (float(s) for s in scores))),
        attack_name=config.variant,
        config_digest=digest,
    )


ReconstructionOracle = Callable[[str, np.ndarray, int], ReconstructionBatch]


def run_reconstruction_attack(
    records: RecordSet,
    oracle: ReconstructionOracle,
    n: int,
) -> ScoreVector:
    """Score every record by its negative mean reconstruction error."""
    if n < 1:
        raise DimError("need at least one reconstruction per record")
    entries = []
    for rid, row in zip(records.ids, records.data):
        try:
            batch = oracle(rid, row, n)
        except Exception as exc:  # noqa: BLE001 - oracle boundary
            raise OracleError(rid, str(exc)) from exc
        entries.append((rid, reconstruction_score(rid, row, batch)))
    digest = _digest({"attack": "reconstruction", "n_reconstructions": n})
    return ScoreVector(tuple(entries), attack_name="reconstruction", config_digest=digest)
