"""Overlay figure output: raster background, mask boundary, extracted coastline."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ShapeError, WriteError
from .raster import BinaryMask, Depth, Raster

MASK_BOUNDARY_COLOR = (255, 220, 0)   # yellow
COASTLINE_COLOR = (255, 40, 40)       # red


def mask_boundary(mask: BinaryMask) -> np.ndarray:
    """Boolean map of land pixels 4-adjacent to a water pixel."""
    land = mask.land()
    water = ~land
    neighbor_water = np.zeros_like(land)
    neighbor_water[1:, :] |= water[:-1, :]
    neighbor_water[:-1, :] |= water[1:, :]
    neighbor_water[:, 1:] |= water[:, :-1]
    neighbor_water[:, :-1] |= water[:, 1:]
    return land & neighbor_water


def _coastline_pixels(coastline) -> np.ndarray:
    if coastline is None:
        return np.zeros((0, 2), dtype=np.int64)
    pixels = getattr(coastline, "pixels", coastline)
    arr = np.asarray(pixels, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShapeError("coastline pixels must be an (n, 2) array of (row, col)")
    return arr


def write_overlay_png(raster: Raster, mask: BinaryMask, coastline, path) -> None:
    """Render the raster in grayscale with mask boundary and coastline colored.

    ``coastline`` may be None, an (n, 2) array of (row, col) pairs, or any
    object exposing such an array as ``.pixels``.
    """
    if (raster.height, raster.width) != (mask.height, mask.width):
        raise ShapeError(
            f"raster {raster.height}x{raster.width} vs mask {mask.height}x{mask.width}"
        )
    gray = raster.channel(0).astype(np.float64)
    if raster.depth is Depth.F32:
        span = gray.max() - gray.min()
        gray = (gray - gray.min()) / span * 255.0 if span > 0 else np.zeros_like(gray)
    rgb = np.repeat(np.clip(gray, 0, 255).astype(np.uint8)[:, :, None], 3, axis=2)

    rgb[mask_boundary(mask)] = MASK_BOUNDARY_COLOR
    pts = _coastline_pixels(coastline)
    if pts.size:
        if pts[:, 0].max() >= mask.height or pts[:, 1].max() >= mask.width:
            raise ShapeError("coastline pixel outside the image grid")
        rgb[pts[:, 0], pts[:, 1]] = COASTLINE_COLOR

    try:
        Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc
