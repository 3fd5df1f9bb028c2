"""CCESAR: two-stage coastline classification and extraction from SAR imagery."""

from .errors import (CCESARError, ConfigError, DataError, DomainError,
                     GenerationError, GeoError, ManifestError,
                     MalformedTiffError, MetricUndefinedError, ModelError,
                     PolygonError, ShapeError, UnsupportedTiffError,
                     WriteError)
from .estimators import CoastlineClassifier, TwoStageExtractor, UNetSegmenter
from .evaluation import ccesar_infer, classification_accuracy, iou, run_experiment
from .postprocess import CannyConfig, CoastlinePath, canny, longest_edge
from .preprocess import PreprocessConfig, preprocess_pipeline
from .raster import BinaryMask, Depth, GeoBoundingBox, Raster
from .synthgen import SynthConfig, generate_dataset
from .tiff import read_tiff, write_tiff
from .training import TrainConfig, train_classifier, train_segmenter

__version__ = "0.1.0"

__all__ = [
    "BinaryMask", "Depth", "GeoBoundingBox", "Raster",
    "CCESARError", "ConfigError", "DataError", "DomainError",
    "GenerationError", "GeoError", "ManifestError", "MalformedTiffError",
    "MetricUndefinedError", "ModelError", "PolygonError", "ShapeError",
    "UnsupportedTiffError", "WriteError",
    "CoastlineClassifier", "UNetSegmenter", "TwoStageExtractor",
    "ccesar_infer", "classification_accuracy", "iou", "run_experiment",
    "CannyConfig", "CoastlinePath", "canny", "longest_edge",
    "PreprocessConfig", "preprocess_pipeline",
    "SynthConfig", "generate_dataset",
    "read_tiff", "write_tiff",
    "TrainConfig", "train_classifier", "train_segmenter",
    "__version__",
]
