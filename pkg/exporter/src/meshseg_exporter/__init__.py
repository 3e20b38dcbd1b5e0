"""Render-bundle to teacher-dataset exporter for the meshseg engine."""

from .backends import (ExportError, SamBackend, StubBackend, load_backend,
                       smallest_mask)
from .export import ExportManifest, export, load_bundle
from .resize import bilinear_resize

__all__ = [
    "ExportError", "ExportManifest", "SamBackend", "StubBackend",
    "bilinear_resize", "export", "load_backend", "load_bundle",
    "smallest_mask",
]
