"""Embedding exporter: rasterized handwriting PNGs -> embedding text file.

The output format is the core pipeline's ingestion contract: first line
``dim=<D>``, an explanatory ``#`` comment line, then one
``<sample_id> v1 ... vD`` row per image.
"""

__version__ = "0.1.0"

from .backbones import build_backbone
from .errors import DuplicateSampleId, ExporterError, MissingWeights, UnreadableImage
from .export import ExportJob, export_embeddings

__all__ = [
    "DuplicateSampleId",
    "ExportJob",
    "ExporterError",
    "MissingWeights",
    "UnreadableImage",
    "build_backbone",
    "export_embeddings",
]
