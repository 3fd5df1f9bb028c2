"""Core raster containers: SAR image grids, land/water masks, geographic bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ShapeError


class Depth(Enum):
    """Pixel precision provenance: quantized 8-bit vs float backscatter."""

    U8 = "u8"
    F32 = "f32"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.uint8) if self is Depth.U8 else np.dtype(np.float32)


@dataclass(frozen=True)
class GeoBoundingBox:
    """Axis-aligned lon/lat box, degrees."""

    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self):
        if not (self.min_lon < self.max_lon and self.min_lat < self.max_lat):
            raise ValueError("degenerate bounding box")
        if not (-90.0 <= self.min_lat and self.max_lat <= 90.0):
            raise ValueError("latitude out of [-90, 90]")
        if not (-180.0 <= self.min_lon and self.max_lon <= 180.0):
            raise ValueError("longitude out of [-180, 180]")

    @property
    def lon_span(self) -> float:
        return self.max_lon - self.min_lon

    @property
    def lat_span(self) -> float:
        return self.max_lat - self.min_lat


@dataclass
class Raster:
    """Single- or dual-channel image grid with bit-depth provenance.

    ``pixels`` is (height, width, channels), row-major, channel-interleaved.
    Row 0 is the northern edge when ``geo_bbox`` is present.
    """

    pixels: np.ndarray
    depth: Depth
    ground_resolution_m: float = 10.0
    geo_bbox: Optional[GeoBoundingBox] = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 2):
            raise ShapeError(f"expected (h, w, 1|2) pixel grid, got shape {px.shape}")
        px = np.ascontiguousarray(px.astype(self.depth.dtype, copy=False))
        if self.depth is Depth.F32 and not np.all(np.isfinite(px)):
            raise ValueError("F32 raster contains non-finite pixels")
        if self.ground_resolution_m <= 0:
            raise ValueError("ground_resolution_m must be positive")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def channel(self, index: int = 0) -> np.ndarray:
        """2-D view of one channel."""
        return self.pixels[:, :, index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return (
            self.depth is other.depth
            and self.pixels.shape == other.pixels.shape
            and np.array_equal(self.pixels, other.pixels)
            and self.ground_resolution_m == other.ground_resolution_m
            and self.geo_bbox == other.geo_bbox
        )


@dataclass
class BinaryMask:
    """Land/water labels on the same grid as a raster: land=255, water=0."""

    values: np.ndarray = field()

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got shape {v.shape}")
        v = np.ascontiguousarray(v.astype(np.uint8, copy=False))
        bad = np.setdiff1d(np.unique(v), [0, 255])
        if bad.size:
            raise ValueError(f"mask values outside {{0, 255}}: {bad.tolist()}")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def land_fraction(self) -> float:
        return float(np.count_nonzero(self.values) / self.values.size)

    def land(self) -> np.ndarray:
        """Boolean land map."""
        return self.values == 255

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.values.shape == other.values.shape and np.array_equal(
            self.values, other.values
        )
