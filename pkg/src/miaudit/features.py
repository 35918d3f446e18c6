"""Feature transforms defining the spaces in which record/sample distances live.

Three transforms are provided: a PCA projection fit on a held-out reference
set, block-normalized histograms of oriented gradients (HOG), and per-channel
color histograms (CHIST). All of them are pure functions of (params, input).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_data import read_matrix_block, write_matrix_block
from .errors import DataError, DimError, IoError, RankError

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class PcaModel:
    """Projection onto the top-k principal components of a reference set.

    `components` rows are orthonormal eigenvectors of the column-mean-centered
    covariance, ordered by descending eigenvalue, each with its first nonzero
    entry made positive. `explained_variance` holds the matching eigenvalues
    and is only consulted when `whitened` is set.
    """

    mean: np.ndarray
    components: np.ndarray
    k: int
    explained_variance: np.ndarray | None = None
    whitened: bool = False

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        comps = np.atleast_2d(np.asarray(self.components, dtype=np.float64))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        if self.explained_variance is not None:
            ev = np.asarray(self.explained_variance, dtype=np.float64).ravel()
            object.__setattr__(self, "explained_variance", ev)
        if not 1 <= self.k <= mean.size:
            raise DimError(f"k={self.k} out of range for {mean.size} features")
        if comps.shape != (self.k, mean.size):
            raise DimError("components shape does not match (k, n_features)")
        gram = comps @ comps.T
        if not np.allclose(gram, np.eye(self.k), atol=_ORTHO_TOL):
            raise DataError("component rows are not orthonormal")


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make the first entry exceeding the noise floor positive in each row."""
    out = components.copy()
    for row in out:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return out


def pca_fit(reference: np.ndarray, k: int, whiten: bool = False) -> PcaModel:
    """Fit a top-k PCA on the reference matrix (rows = observations)."""
    reference = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    n, d = reference.shape
    if k < 1:
        raise DimError("k must be at least 1")
    if n < k or d < k:
        raise RankError(f"need at least k={k} rows and columns, got {n}x{d}")
    mean = reference.mean(axis=0)
    centered = reference - mean
    # SVD of the centered data; eigenvalues of the covariance are s^2/(n-1)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    eigvals = (s * s) / max(n - 1, 1)
    scale = max(eigvals[0], 1.0)
    if np.count_nonzero(eigvals > scale * 1e-12) < k:
        raise RankError(f"input has fewer than {k} nonzero eigenvalues")
    components = _fix_signs(vt[:k])
    return PcaModel(
        mean=mean,
        components=components,
        k=k,
        explained_variance=eigvals[:k],
        whitened=whiten,
    )


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project a vector or matrix of row vectors into the component space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.mean.size:
        raise DimError(
            f"input has {x.shape[-1]} features, model expects {model.mean.size}"
        )
    projected = (x - model.mean) @ model.components.T
    if model.whitened:
        if model.explained_variance is None:
            raise DataError("whitened model is missing explained variances")
        projected = projected / np.sqrt(model.explained_variance)
    return projected


def save_pca_model(model: PcaModel, path: str | Path) -> None:
    """Write mean and components as two matrix blocks plus a JSON sidecar."""
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            write_matrix_block(model.mean.reshape(1, -1), fh)
            write_matrix_block(model.components, fh)
            if model.explained_variance is not None:
                write_matrix_block(model.explained_variance.reshape(1, -1), fh)
        sidecar = {
            "k": model.k,
            "whitened": model.whitened,
            "sign_convention": "first-nonzero-positive",
            "has_explained_variance": model.explained_variance is not None,
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_pca_model(path: str | Path) -> PcaModel:
    path = Path(path)
    try:
        meta = json.loads(Path(str(path) + ".json").read_text())
        with open(path, "rb") as fh:
            mean = read_matrix_block(fh).ravel()
            components = read_matrix_block(fh)
            ev = None
            if meta.get("has_explained_variance"):
                ev = read_matrix_block(fh).ravel()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return PcaModel(
        mean=mean,
        components=components,
        k=int(meta["k"]),
        explained_variance=ev,
        whitened=bool(meta.get("whitened", False)),
    )


# ---------------------------------------------------------------------------
# Histogram of oriented gradients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HogParams:
    """HOG layout: defaults suit 28x28 grayscale inputs (4x4 cells of 7px)."""

    image_shape: tuple[int, int] = (28, 28)
    cell_size: int = 7
    orientation_bins: int = 9
    block_size: int = 2
    normalizer_eps: float = 1e-6

    def __post_init__(self):
        h, w = self.image_shape
        if self.cell_size < 1 or h % self.cell_size or w % self.cell_size:
            raise DimError(
                f"image shape {self.image_shape} not divisible by cell size {self.cell_size}"
            )
        if self.orientation_bins < 2:
            raise DimError("need at least 2 orientation bins")
        cy, cx = h // self.cell_size, w // self.cell_size
        if self.block_size < 1 or self.block_size > min(cy, cx):
            raise DimError("block size exceeds the cell grid")

    @property
    def cell_grid(self) -> tuple[int, int]:
        return (
            self.image_shape[0] // self.cell_size,
            self.image_shape[1] // self.cell_size,
        )

    @property
    def n_blocks(self) -> int:
        cy, cx = self.cell_grid
        return (cy - self.block_size + 1) * (cx - self.block_size + 1)

    @property
    def feature_length(self) -> int:
        return self.n_blocks * self.block_size**2 * self.orientation_bins


def hog_features(image: np.ndarray, params: HogParams) -> np.ndarray:
    """Concatenated block-normalized unsigned orientation histograms."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != params.image_shape:
        raise DimError(f"image shape {image.shape} != {params.image_shape}")
    gy, gx = np.gradient(image)
    magnitude = np.hypot(gx, gy)
    # unsigned orientations: angles folded into [0, pi)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)
    bin_width = np.pi / params.orientation_bins
    bin_idx = np.minimum(
        (orientation / bin_width).astype(np.intp), params.orientation_bins - 1
    )

    cy, cx = params.cell_grid
    cells = np.zeros((cy, cx, params.orientation_bins))
    cs = params.cell_size
    for b in range(params.orientation_bins):
        masked = np.where(bin_idx == b, magnitude, 0.0)
        cells[:, :, b] = masked.reshape(cy, cs, cx, cs).sum(axis=(1, 3))

    bs = params.block_size
    blocks = []
    for by in range(cy - bs + 1):
        for bx in range(cx - bs + 1):
            vec = cells[by : by + bs, bx : bx + bs, :].ravel()
            norm = math.sqrt(float(vec @ vec) + params.normalizer_eps**2)
            blocks.append(vec / norm if norm > params.normalizer_eps else vec * 0.0)
    return np.concatenate(blocks)


# ---------------------------------------------------------------------------
# Color histogram
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChistParams:
    bins_per_channel: int = 16
    channels: int = 3
    intensity_range: tuple[float, float] = (0.0, 256.0)

    def __post_init__(self):
        if self.bins_per_channel < 1:
            raise DimError("need at least one bin per channel")
        lo, hi = self.intensity_range
        if not hi > lo:
            raise DimError("intensity range upper bound must exceed lower bound")

    @property
    def feature_length(self) -> int:
        return self.bins_per_channel * self.channels


def chist_features(image: np.ndarray, params: ChistParams) -> np.ndarray:
    """Per-channel normalized histograms, concatenated channel-major.

    Intensities are binned into uniform half-open intervals over [lo, hi);
    out-of-range values are clamped into the boundary bins.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != params.channels:
        raise DimError(
            f"expected (H, W, {params.channels}) image, got shape {image.shape}"
        )
    lo, hi = params.intensity_range
    nb = params.bins_per_channel
    scaled = (image - lo) / (hi - lo) * nb
    idx = np.clip(np.floor(scaled).astype(np.intp), 0, nb - 1)
    n_pixels = image.shape[0] * image.shape[1]
    hist = np.empty(nb * params.channels)
    for c in range(params.channels):
        counts = np.bincount(idx[:, :, c].ravel(), minlength=nb)
        hist[c * nb : (c + 1) * nb] = counts / n_pixels
    return hist
