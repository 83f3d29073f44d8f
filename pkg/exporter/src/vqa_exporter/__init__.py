"""Artifact exporter: model tensors to portable banks, plus a scorer server."""

from .adapters import Adapter, ChainAdapter, TinyRandomAdapter
from .export import ExportError, ExportJob, export
from .formats import (
    write_candidate_table,
    write_feature_bank,
    write_grouped_bank,
    write_manifest,
    write_vocabulary,
)
from .server import ScorerServer, serve_scorer

__version__ = "0.1.0"

__all__ = [
    "Adapter",
    "ChainAdapter",
    "ExportError",
    "ExportJob",
    "ScorerServer",
    "TinyRandomAdapter",
    "export",
    "serve_scorer",
    "write_candidate_table",
    "write_feature_bank",
    "write_grouped_bank",
    "write_manifest",
    "write_vocabulary",
    "__version__",
]
