"""SAR preprocessing: Lee speckle filtering, backscatter normalization, upsampling.

Float (32-bit) rasters run the full chain; 8-bit rasters bypass it and are
only rescaled to [0, 1], matching how quantized products are consumed as-is.

The steps are exposed both as plain functions on rasters and as sklearn-style
transformers operating on batches of 2-D arrays, so they compose with
``sklearn.pipeline.Pipeline``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DomainError, ShapeError
from .raster import Depth, Raster


@dataclass
class PreprocessConfig:
    lee_window: int = 5
    noise_cv: Optional[float] = None   # estimated from the image when None
    upsample_factor: float = 2.0
    epsilon_db_floor: float = 1e-6

    def __post_init__(self):
        if self.lee_window < 3 or self.lee_window % 2 == 0:
            raise ValueError("lee_window must be odd and >= 3")
        if self.upsample_factor < 1:
            raise ValueError("upsample_factor must be >= 1")
        if self.epsilon_db_floor <= 0:
            raise ValueError("epsilon_db_floor must be positive")


def _lee_channel(z: np.ndarray, window: int, noise_cv: Optional[float]) -> np.ndarray:
    z = z.astype(np.float64)
    n = window * window
    mean = uniform_filter(z, size=window, mode="mirror")
    mean_sq = uniform_filter(z * z, size=window, mode="mirror")
    # sample variance over the window (Bessel-corrected)
    var = np.maximum(mean_sq - mean * mean, 0.0) * (n / (n - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        cz = np.where(mean > 0, np.sqrt(var) / mean, 0.0)
    if noise_cv is None:
        positive = cz[(mean > 0) & (cz > 0)]
        noise_cv = float(np.percentile(positive, 10)) if positive.size else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = 1.0 - (noise_cv / cz) ** 2
    weight = np.where((cz > 0) & (mean > 0), weight, 0.0)
    weight = np.clip(weight, 0.0, 1.0)
    return (mean + weight * (z - mean)).astype(np.float32)


def lee_filter(raster: Raster, config: PreprocessConfig = None) -> Raster:
    """Adaptive speckle filter: blend toward the window mean where the local
    coefficient of variation is dominated by noise."""
    config = config or PreprocessConfig()
    if raster.depth is not Depth.F32:
        raise DomainError("lee_filter expects an F32 raster")
    if np.any(raster.pixels < 0):
        raise DomainError("lee_filter expects nonnegative backscatter")
    out = np.stack(
        [
            _lee_channel(raster.channel(c), config.lee_window, config.noise_cv)
            for c in range(raster.channels)
        ],
        axis=2,
    )
    return Raster(pixels=out, depth=Depth.F32,
                  ground_resolution_m=raster.ground_resolution_m,
                  geo_bbox=raster.geo_bbox)


def _normalize_channel(x: np.ndarray, floor: float) -> np.ndarray:
    x_db = 10.0 * np.log10(np.maximum(x.astype(np.float64), floor))
    lo, hi = x_db.min(), x_db.max()
    if hi == lo:
        return np.zeros_like(x_db, dtype=np.float32)
    return ((x_db - lo) / (hi - lo)).astype(np.float32)


def normalize_backscatter(raster: Raster, config: PreprocessConfig = None) -> Raster:
    """Min-max normalize in dB space to [0, 1] per channel."""
    config = config or PreprocessConfig()
    if np.any(raster.pixels < 0):
        raise DomainError("normalize_backscatter expects nonnegative pixels")
    out = np.stack(
        [
            _normalize_channel(raster.channel(c), config.epsilon_db_floor)
            for c in range(raster.channels)
        ],
        axis=2,
    )
    return Raster(pixels=out, depth=Depth.F32,
                  ground_resolution_m=raster.ground_resolution_m,
                  geo_bbox=raster.geo_bbox)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-center alignment and clamped edges.

    Accepts (h, w) or (h, w, c) arrays; used both by the public upsampling
    step and by the training harness for arbitrary resizes.
    """
    squeeze = image.ndim == 2
    if squeeze:
        image = image[:, :, None]
    h, w, _ = image.shape
    src_r = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    src_c = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    r0 = np.clip(np.floor(src_r).astype(int), 0, h - 1)
    c0 = np.clip(np.floor(src_c).astype(int), 0, w - 1)
    r1 = np.clip(r0 + 1, 0, h - 1)
    c1 = np.clip(c0 + 1, 0, w - 1)
    fr = np.clip(src_r - np.floor(src_r), 0.0, 1.0)
    fr = np.where(src_r < 0, 0.0, np.where(src_r > h - 1, 1.0, fr))[:, None, None]
    fc = np.clip(src_c - np.floor(src_c), 0.0, 1.0)
    fc = np.where(src_c < 0, 0.0, np.where(src_c > w - 1, 1.0, fc))[None, :, None]
    img = image.astype(np.float64)
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bottom = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    out = top * (1 - fr) + bottom * fr
    out = out.astype(np.float32)
    return out[:, :, 0] if squeeze else out


def upsample_bilinear(raster: Raster, factor: float) -> Raster:
    """Upsample by ``factor`` (>= 1); ground resolution shrinks accordingly."""
    if factor < 1:
        raise DomainError("upsample factor must be >= 1 (downsampling unsupported)")
    if factor == 1:
        return raster
    out_h = int(round(raster.height * factor))
    out_w = int(round(raster.width * factor))
    out = resize_bilinear(raster.pixels.astype(np.float64), out_h, out_w)
    if raster.depth is Depth.U8:
        out = np.clip(np.rint(out), 0, 255)
    return Raster(pixels=out, depth=raster.depth,
                  ground_resolution_m=raster.ground_resolution_m / factor,
                  geo_bbox=raster.geo_bbox)


def preprocess_pipeline(raster: Raster, config: PreprocessConfig = None) -> Raster:
    """Full chain for F32 rasters; U8 rasters are only rescaled to [0, 1]."""
    config = config or PreprocessConfig()
    if raster.depth is Depth.U8:
        scaled = raster.pixels.astype(np.float32) / 255.0
        return Raster(pixels=scaled, depth=Depth.F32,
                      ground_resolution_m=raster.ground_resolution_m,
                      geo_bbox=raster.geo_bbox)
    filtered = lee_filter(raster, config)
    normalized = normalize_backscatter(filtered, config)
    return upsample_bilinear(normalized, config.upsample_factor)


def _as_image_batch(X) -> list:
    if isinstance(X, np.ndarray) and X.ndim in (3, 4):
        return [X[i] for i in range(X.shape[0])]
    if isinstance(X, (list, tuple)):
        return [np.asarray(x) for x in X]
    raise ShapeError("expected a batch of 2-D/3-D images")


class LeeFilter(BaseEstimator, TransformerMixin):
    """Transformer wrapper around the Lee speckle filter."""

    def __init__(self, window: int = 5, noise_cv: Optional[float] = None):
        self.window = window
        self.noise_cv = noise_cv

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [
            _lee_channel(np.asarray(img, dtype=np.float64).squeeze(), self.window, self.noise_cv)
            for img in _as_image_batch(X)
        ]


class BackscatterNormalizer(BaseEstimator, TransformerMixin):
    """Transformer: per-image dB conversion + min-max scaling to [0, 1]."""

    def __init__(self, epsilon_db_floor: float = 1e-6):
        self.epsilon_db_floor = epsilon_db_floor

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [
            _normalize_channel(np.asarray(img, dtype=np.float64).squeeze(),
                               self.epsilon_db_floor)
            for img in _as_image_batch(X)
        ]


class BilinearUpsampler(BaseEstimator, TransformerMixin):
    """Transformer: bilinear upsampling by a fixed factor >= 1."""

    def __init__(self, factor: float = 2.0):
        self.factor = factor

    def fit(self, X, y=None):
        if self.factor < 1:
            raise DomainError("upsample factor must be >= 1")
        return self

    def transform(self, X):
        if self.factor < 1:
            raise DomainError("upsample factor must be >= 1")
        out = []
        for img in _as_image_batch(X):
            img = np.asarray(img, dtype=np.float64)
            h, w = img.shape[:2]
            out.append(resize_bilinear(img, int(round(h * self.factor)),
                                       int(round(w * self.factor))))
        return out
