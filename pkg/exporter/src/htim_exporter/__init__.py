"""Frozen transformer token-vector export for tweet files."""

from .export import (ExportConfig, ExportError, ExportStats, MODEL_ALIASES,
                     export_file, load_backend, resolve_model)

__version__ = "0.1.0"

__all__ = [
    "ExportConfig",
    "ExportError",
    "ExportStats",
    "MODEL_ALIASES",
    "export_file",
    "load_backend",
    "resolve_model",
    "__version__",
]
