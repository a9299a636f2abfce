"""hs-export/v1 writer: frozen-checkpoint tensors for file-backend consumers."""

__version__ = "0.1.0"

from .export import ExportManifest, export_corpus

__all__ = ["ExportManifest", "export_corpus", "__version__"]
