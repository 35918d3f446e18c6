"""sampler-adapter: export generative-model samples and reconstructions
to the audit toolkit's matrix file format."""

__version__ = "0.1.0"

from .export import ExportSpec, export_reconstructions, export_samples
from .miam import ExportError, read_matrix, write_matrix
from .models import ConstantGenerator, IdentityAutoencoder, load_model

__all__ = [
    "ExportSpec",
    "ExportError",
    "ConstantGenerator",
    "IdentityAutoencoder",
    "export_reconstructions",
    "export_samples",
    "load_model",
    "read_matrix",
    "write_matrix",
]
