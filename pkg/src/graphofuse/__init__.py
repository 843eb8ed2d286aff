"""Multimodal handwriting classification toolkit.

Pipeline: pen-stream ingestion -> online kinematic features + trajectory
rasterization -> offline features -> calibrated SVM / gradient-boosted-tree
classifiers -> multimodal fusion (feature concatenation, soft voting, or the
conditional-fusion ensemble) evaluated under subject-grouped cross-validation.
"""

__version__ = "0.1.0"

from .errors import GraphofuseError
from .fusion import FusionConfig, FusionDecision, concat_features, conditional_fusion_predict, soft_vote
from .ingest import Dataset, FormatConfig, HandwritingRecord, PenSample, Stroke, load_dataset, parse_pen_stream, segment_strokes
from .models import GbtModel, ProbabilityPair, SvmModel, load_model, predict_proba_gbt, predict_proba_svm, save_model, train_gbt, train_svm
from .offline_features import EmbeddingTable, OfflineExtractorKind, extract_offline, extract_zoning, load_embeddings
from .online_features import FeatureManifest, FeatureVector, build_manifest, compute_channels, count_local_extrema, extract_online
from .raster import RasterConfig, RasterImage, rasterize, read_png, write_png
from .synth import SynthConfig, generate, golden_config

__all__ = [
    "Dataset",
    "EmbeddingTable",
    "FeatureManifest",
    "FeatureVector",
    "FormatConfig",
    "FusionConfig",
    "FusionDecision",
    "GbtModel",
    "GraphofuseError",
    "HandwritingRecord",
    "OfflineExtractorKind",
    "PenSample",
    "ProbabilityPair",
    "RasterConfig",
    "RasterImage",
    "Stroke",
    "SvmModel",
    "SynthConfig",
    "build_manifest",
    "compute_channels",
    "concat_features",
    "conditional_fusion_predict",
    "count_local_extrema",
    "extract_offline",
    "extract_online",
    "extract_zoning",
    "generate",
    "golden_config",
    "load_dataset",
    "load_embeddings",
    "load_model",
    "parse_pen_stream",
    "predict_proba_gbt",
    "predict_proba_svm",
    "rasterize",
    "read_png",
    "save_model",
    "segment_strokes",
    "soft_vote",
    "train_gbt",
    "train_svm",
    "write_png",
]
