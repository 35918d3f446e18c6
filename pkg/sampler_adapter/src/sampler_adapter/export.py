"""Sample and reconstruction exports.

`export_samples` draws latents z ~ N(0, 1), decodes them, flattens row-major
(channel-last) and writes one matrix file. `export_reconstructions` encodes
each input record, draws n latents from the posterior N(mu, sigma^2) and
writes one matrix file per record. Pixel values are rescaled to [0, 1] at
this boundary so the toolkit never sees framework-specific ranges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .miam import ExportError, write_matrix
from .models import load_model

Mode = str  # "samples" | "reconstructions"


@dataclass(frozen=True)
class ExportSpec:
    model_source: str
    mode: Mode
    n: int
    output_path: str
    seed: int = 0
    image_shape: tuple[int, ...] = (28, 28)
    output_range: tuple[float, float] = (0.0, 1.0)
    conditional_label: int | None = None
    dtype: str = "f64"

    def __post_init__(self):
        if self.n < 1:
            raise ExportError("n must be at least 1")
        if self.mode not in ("samples", "reconstructions"):
            raise ExportError(f"unknown mode {self.mode!r}")
        lo, hi = self.output_range
        if not lo < hi:
            raise ExportError("output range must satisfy low < high")


def _scale_to_unit(pixels: np.ndarray, output_range: tuple[float, float]) -> np.ndarray:
    """Map declared model output range onto [0, 1]; identity when already there."""
    lo, hi = output_range
    if (lo, hi) == (0.0, 1.0):
        return np.clip(pixels, 0.0, 1.0) if pixels.min() < 0 or pixels.max() > 1 else pixels
    return np.clip((pixels - lo) / (hi - lo), 0.0, 1.0)


def _flatten(images: np.ndarray, image_shape: tuple[int, ...]) -> np.ndarray:
    if images.shape[1:] != tuple(image_shape):
        raise ExportError(
            f"model emitted shape {images.shape[1:]}, declared image shape is {tuple(image_shape)}"
        )
    return images.reshape(images.shape[0], -1)


def export_samples(spec: ExportSpec) -> Path:
    """Decode n prior draws and write them as one matrix file."""
    model = load_model(spec.model_source, spec.image_shape)
    if not hasattr(model, "decode"):
        raise ExportError(f"model {spec.model_source!r} has no decoder")
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal((spec.n, model.latent_dim))
    images = np.asarray(model.decode(z), dtype=np.float64)
    rows = _scale_to_unit(_flatten(images, spec.image_shape), spec.output_range)
    out = Path(spec.output_path)
    write_matrix(rows, out, dtype=spec.dtype)
    _write_manifest(out, spec)
    return out


def export_reconstructions(
    spec: ExportSpec, records: np.ndarray, record_ids: list[str]
) -> list[Path]:
    """Write one n-row reconstruction file per record into the output directory."""
    model = load_model(spec.model_source, spec.image_shape)
    if not (hasattr(model, "encode") and hasattr(model, "decode")):
        raise ExportError(
            f"model {spec.model_source!r} must expose an encoder and a decoder"
        )
    records = np.atleast_2d(np.asarray(records, dtype=np.float64))
    if len(record_ids) != records.shape[0]:
        raise ExportError(
            f"{len(record_ids)} record ids for {records.shape[0]} records"
        )
    width = int(np.prod(spec.image_shape))
    if records.shape[1] != width:
        raise ExportError(
            f"records have {records.shape[1]} features, image shape implies {width}"
        )
    out_dir = Path(spec.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    written: list[Path] = []
    for rid, row in zip(record_ids, records):
        mu, sigma = model.encode(row.reshape(1, *spec.image_shape))
        z = mu + sigma * rng.standard_normal((spec.n, mu.shape[1]))
        images = np.asarray(model.decode(z), dtype=np.float64)
        rows = _scale_to_unit(_flatten(images, spec.image_shape), spec.output_range)
        path = out_dir / f"{rid}.bin"
        write_matrix(rows, path, dtype=spec.dtype)
        written.append(path)
    _write_manifest(out_dir / "batches", spec)
    return written


def _write_manifest(out: Path, spec: ExportSpec) -> None:
    manifest = {
        "tool": "sampler-adapter",
        "model_source": spec.model_source,
        "mode": spec.mode,
        "n": spec.n,
        "seed": spec.seed,
        "image_shape": list(spec.image_shape),
        "output_range": list(spec.output_range),
        "conditional_label": spec.conditional_label,
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2))
