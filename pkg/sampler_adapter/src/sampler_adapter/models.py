"""Model backends the adapter can sample from.

Two stub models make the export contract testable without any trained
checkpoint: a constant generator and an identity autoencoder. Everything else
is treated as a TorchScript checkpoint path and loaded through torch, which is
an optional dependency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .miam import ExportError


@dataclass(frozen=True)
class ConstantGenerator:
    """Decoder that ignores the latent and emits one fixed image."""

    image_shape: tuple[int, ...]
    value: float = 0.5

    @property
    def latent_dim(self) -> int:
        return int(np.prod(self.image_shape))

    def decode(self, z: np.ndarray) -> np.ndarray:
        return np.full((z.shape[0], *self.image_shape), self.value)


@dataclass(frozen=True)
class IdentityAutoencoder:
    """Autoencoder whose latent is the flattened image itself.

    The encoder posterior is a point mass (zero variance), so decoding an
    encoded record returns it bit-for-bit: the reference oracle for the
    reconstruction export path.
    """

    image_shape: tuple[int, ...]

    @property
    def latent_dim(self) -> int:
        return int(np.prod(self.image_shape))

    def encode(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        flat = x.reshape(x.shape[0], -1)
        return flat, np.zeros_like(flat)  # (mu, sigma)

    def decode(self, z: np.ndarray) -> np.ndarray:
        return z.reshape(z.shape[0], *self.image_shape)


class TorchScriptModel:
    """Wrapper around a TorchScript checkpoint exposing decode (and encode)."""

    def __init__(self, path: str, image_shape: tuple[int, ...]):
        try:
            import torch
        except ImportError as exc:
            raise ExportError(
                "loading a checkpoint requires the optional torch dependency"
            ) from exc
        try:
            self._module = torch.jit.load(path, map_location="cpu")
        except Exception as exc:  # torch raises several load error types
            raise ExportError(f"cannot load model {path!r}: {exc}") from exc
        self._module.eval()
        self._torch = torch
        self.image_shape = image_shape
        self.latent_dim = int(getattr(self._module, "latent_dim", 100))

    def decode(self, z: np.ndarray) -> np.ndarray:
        with self._torch.no_grad():
            out = self._module.decode(self._torch.from_numpy(z.astype(np.float32)))
        return out.cpu().numpy().astype(np.float64)

    def encode(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        with self._torch.no_grad():
            mu, sigma = self._module.encode(
                self._torch.from_numpy(x.astype(np.float32))
            )
        return (
            mu.cpu().numpy().astype(np.float64),
            sigma.cpu().numpy().astype(np.float64),
        )


def load_model(source: str, image_shape: tuple[int, ...]):
    """Resolve a model source string into a backend object.

    `stub:identity` and `stub:constant[:value]` name the built-in stubs; any
    other string is treated as a TorchScript checkpoint path.
    """
    if source == "stub:identity":
        return IdentityAutoencoder(image_shape)
    if source.startswith("stub:constant"):
        parts = source.split(":")
        value = float(parts[2]) if len(parts) > 2 else 0.5
        if not 0.0 <= value <= 1.0:
            raise ExportError("constant stub value must lie in [0, 1]")
        return ConstantGenerator(image_shape, value)
    if source.startswith("stub:"):
        raise ExportError(f"unknown stub model {source!r}")
    return TorchScriptModel(source, image_shape)
