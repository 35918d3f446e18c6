"""Controllable synthetic generative models for desk-scale audit experiments.

The memorizing generator makes overfitting an explicit dial: with probability
rho a sample is a noisy copy of a training-pool row, otherwise a fresh draw
from a Gaussian-mixture population. The biased reconstructor emits per-record
Gaussian residuals whose scale depends on claimed membership. Both are pure
functions of their seeds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .core_data import ReconstructionBatch, SampleMatrix
from .errors import ConfigError, DimError


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture population: component means, isotropic scales and weights."""

    means: np.ndarray  # (components, dim)
    scales: np.ndarray  # (components,) isotropic std per component
    weights: np.ndarray  # (components,) summing to 1

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        scales = np.asarray(self.scales, dtype=np.float64).ravel()
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)
        k = means.shape[0]
        if scales.size != k or weights.size != k:
            raise ConfigError("means, scales and weights disagree on component count")
        if np.any(scales < 0):
            raise ConfigError("component scales must be non-negative")
        if not np.isclose(weights.sum(), 1.0):
            raise ConfigError("mixture weights must sum to 1")
        if np.any(weights < 0):
            raise ConfigError("mixture weights must be non-negative")

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        out = self.means[comp] + self.scales[comp, None] * rng.standard_normal(
            (n, self.dim)
        )
        return out


def default_population(
    dim: int = 40, components: int = 10, spread: float = 6.0, seed: int = 0
) -> GaussianMixture:
    """Unit-variance mixture with component means spread N(0, spread^2 I)."""
    rng = np.random.default_rng(seed)
    means = spread * rng.standard_normal((components, dim))
    return GaussianMixture(
        means=means,
        scales=np.ones(components),
        weights=np.full(components, 1.0 / components),
    )


@dataclass(frozen=True)
class MemorizingGenerator:
    train_pool: np.ndarray  # rows the generator may replicate
    memorization_rate: float  # rho in [0, 1]
    noise_scale: float  # sigma >= 0, isotropic noise on memorized copies
    population: GaussianMixture
    seed: int = 0

    def __post_init__(self):
        pool = np.atleast_2d(np.asarray(self.train_pool, dtype=np.float64))
        object.__setattr__(self, "train_pool", pool)
        if not 0.0 <= self.memorization_rate <= 1.0:
            raise ConfigError("memorization rate must lie in [0, 1]")
        if self.noise_scale < 0:
            raise ConfigError("noise scale must be non-negative")
        if self.memorization_rate > 0 and pool.size == 0:
            raise ConfigError("memorizing generator needs a non-empty train pool")
        if pool.size and pool.shape[1] != self.population.dim:
            raise DimError("train pool and population disagree on dimension")


def generate(gen: MemorizingGenerator, n: int) -> SampleMatrix:
    """Draw n samples; a deterministic function of (generator, n)."""
    if n < 1:
        raise ConfigError("need at least one sample")
    rng = np.random.default_rng(np.random.SeedSequence(gen.seed))
    dim = gen.population.dim
    memorized = rng.random(n) < gen.memorization_rate
    out = np.empty((n, dim))
    n_mem = int(memorized.sum())
    if n_mem:
        idx = rng.integers(0, gen.train_pool.shape[0], size=n_mem)
        copies = gen.train_pool[idx]
        if gen.noise_scale > 0:
            copies = copies + gen.noise_scale * rng.standard_normal((n_mem, dim))
        out[memorized] = copies
    n_pop = n - n_mem
    if n_pop:
        out[~memorized] = gen.population.draw(n_pop, rng)
    note = (
        f"memorizing-generator rho={gen.memorization_rate} sigma={gen.noise_scale} "
        f"pool={gen.train_pool.shape[0]} seed={gen.seed}"
    )
    return SampleMatrix(out, source_note=note)


@dataclass(frozen=True)
class BiasedReconstructor:
    """Reconstruction oracle whose residual scale depends on membership."""

    member_ids: frozenset[str]
    residual_scale_member: float
    residual_scale_nonmember: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "member_ids", frozenset(self.member_ids))
        if not 0 < self.residual_scale_member < self.residual_scale_nonmember:
            raise ConfigError(
                "need residual scales 0 < member < nonmember for a biased oracle"
            )


def _record_stream(seed: int, record_id: str) -> np.random.Generator:
    # stable per-record stream independent of call order
    digest = hashlib.sha256(record_id.encode()).digest()
    return np.random.default_rng(
        np.random.SeedSequence([seed, int.from_bytes(digest[:8], "little")])
    )


def reconstruct(
    rec: BiasedReconstructor, record_id: str, x: np.ndarray, n: int
) -> ReconstructionBatch:
    """Emit n noisy reconstructions of x; deterministic per (seed, record)."""
    if n < 1:
        raise ConfigError("need at least one reconstruction")
    x = np.asarray(x, dtype=np.float64).ravel()
    scale = (
        rec.residual_scale_member
        if record_id in rec.member_ids
        else rec.residual_scale_nonmember
    )
    rng = _record_stream(rec.seed, record_id)
    residuals = scale * rng.standard_normal((n, x.size))
    return ReconstructionBatch(record_id=record_id, reconstructions=x + residuals)
