"""Exception hierarchy shared across the package."""


class CCESARError(Exception):
    """Base class for all package errors."""


class UnsupportedTiffError(CCESARError):
    """TIFF feature outside the supported baseline subset (compression, tiling, ...)."""


class MalformedTiffError(CCESARError):
    """Structurally broken TIFF: bad magic, truncated IFD, out-of-range offsets."""


class WriteError(CCESARError):
    """Output file could not be written."""


class ManifestError(CCESARError):
    """Dataset manifest missing, unreadable, or containing invalid tokens."""


class ShapeError(CCESARError):
    """Array dimensions do not match what the operation requires."""


class DomainError(CCESARError):
    """Input values outside the operation's domain (negative pixels, factor < 1, ...)."""


class GenerationError(CCESARError):
    """Synthetic scene generation could not satisfy its constraints."""


class PolygonError(CCESARError):
    """Malformed polygon geometry (ring with fewer than 3 vertices, NaN coordinates)."""


class GeoError(CCESARError):
    """Missing or invalid geographic metadata."""


class ModelError(CCESARError):
    """Weight/architecture mismatch or missing trained weights."""


class DataError(CCESARError):
    """Training data does not satisfy the recipe's preconditions."""


class MetricUndefinedError(CCESARError):
    """Metric has no defined value for this input (e.g. empty edge set)."""


class ConfigError(CCESARError):
    """Run configuration file could not be parsed or contains invalid values."""
