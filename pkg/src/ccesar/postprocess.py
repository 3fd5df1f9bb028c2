"""Coastline extraction from binarized masks: Canny edges, longest contiguous
edge component, and the average minimum Euclidean edge distance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy import ndimage

from .errors import MetricUndefinedError, ShapeError
from .raster import BinaryMask, Raster

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass
class CannyConfig:
    tau_low: float = 50.0
    tau_high: float = 150.0           # 1:3 low:high ratio
    gaussian_sigma: float = 1.4
    gaussian_size: int = 5

    def __post_init__(self):
        if not (0 < self.tau_low < self.tau_high <= 255):
            raise ValueError("need 0 < tau_low < tau_high <= 255")
        if self.gaussian_size % 2 == 0 or self.gaussian_size < 3:
            raise ValueError("gaussian_size must be odd and >= 3")
        if self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be positive")


@dataclass
class EdgeMap:
    flags: np.ndarray  # bool grid

    def __post_init__(self):
        f = np.asarray(self.flags)
        if f.ndim != 2:
            raise ShapeError("edge map must be 2-D")
        self.flags = np.ascontiguousarray(f.astype(bool))

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def count(self) -> int:
        return int(self.flags.sum())


@dataclass
class CoastlinePath:
    """One 8-connected edge component, stored as sorted (row, col) pixels."""

    pixels: np.ndarray
    grid_shape: Tuple[int, int]

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((arr[:, 1], arr[:, 0]))
        self.pixels = arr[order]

    @property
    def size(self) -> int:
        return len(self.pixels)

    @property
    def empty(self) -> bool:
        return self.size == 0

    @property
    def bounding_box(self) -> Tuple[int, int, int, int]:
        """(min_row, min_col, max_row, max_col); raises on empty path."""
        if self.empty:
            raise MetricUndefinedError("empty coastline has no bounding box")
        return (
            int(self.pixels[:, 0].min()),
            int(self.pixels[:, 1].min()),
            int(self.pixels[:, 0].max()),
            int(self.pixels[:, 1].max()),
        )

    def as_grid(self) -> np.ndarray:
        grid = np.zeros(self.grid_shape, dtype=bool)
        if not self.empty:
            grid[self.pixels[:, 0], self.pixels[:, 1]] = True
        return grid

    @classmethod
    def empty_path(cls, grid_shape: Tuple[int, int]) -> "CoastlinePath":
        return cls(pixels=np.zeros((0, 2), dtype=np.int64), grid_shape=grid_shape)


def _gaussian_kernel_1d(sigma: float, size: int) -> np.ndarray:
    half = size // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs ** 2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _magnitude_scale(config: CannyConfig) -> float:
    """Scale factor mapping the theoretical magnitude maximum to 255.

    The maximum is attained per component by an ideal 0/255 step through the
    smoothing+Sobel cascade: 255 times the positive-coefficient sum of the
    combined kernel, with sqrt(2) for the two components jointly.
    """
    g = _gaussian_kernel_1d(config.gaussian_sigma, config.gaussian_size)
    gauss2d = np.outer(g, g)
    sobel_x = np.outer([1.0, 2.0, 1.0], [-1.0, 0.0, 1.0])
    combined = ndimage.convolve(
        np.pad(gauss2d, 2), sobel_x, mode="constant"
    )
    pos_sum = combined[combined > 0].sum()
    theoretical_max = 255.0 * pos_sum * np.sqrt(2.0)
    return 255.0 / theoretical_max


# NMS neighbor offsets per quantized gradient direction sector
_SECTOR_OFFSETS = {
    0: (0, 1),     # 0 deg: gradient east-west
    1: (1, 1),     # 45 deg: gradient down-right (rows grow downward)
    2: (1, 0),     # 90 deg
    3: (1, -1),    # 135 deg
}


def canny(source: Union[BinaryMask, Raster], config: CannyConfig = None) -> EdgeMap:
    """Canny edge detection on a single-channel image in [0, 255].

    Gaussian smoothing (mirror border), 3x3 Sobel gradients, magnitude scaled
    so the theoretical maximum maps to 255, non-maximum suppression over
    directions quantized to 45-degree sectors, then 8-connected hysteresis.
    """
    config = config or CannyConfig()
    if isinstance(source, BinaryMask):
        img = source.values.astype(np.float64)
    else:
        if source.channels != 1:
            raise ShapeError("canny expects a single-channel input")
        img = source.channel(0).astype(np.float64)
        if source.depth.name == "F32":
            img = img * 255.0
    g = _gaussian_kernel_1d(config.gaussian_sigma, config.gaussian_size)
    smooth = ndimage.correlate1d(img, g, axis=0, mode="mirror")
    smooth = ndimage.correlate1d(smooth, g, axis=1, mode="mirror")

    gx = ndimage.correlate1d(smooth, [1.0, 2.0, 1.0], axis=0, mode="mirror")
    gx = ndimage.correlate1d(gx, [-1.0, 0.0, 1.0], axis=1, mode="mirror")
    gy = ndimage.correlate1d(smooth, [1.0, 2.0, 1.0], axis=1, mode="mirror")
    gy = ndimage.correlate1d(gy, [-1.0, 0.0, 1.0], axis=0, mode="mirror")

    mag = np.hypot(gx, gy) * _magnitude_scale(config)

    # non-maximum suppression: keep if >= forward neighbor and > backward
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    sector = ((angle + 22.5) // 45.0).astype(int) % 4
    h, w = mag.shape
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = mag
    keep = np.zeros((h, w), dtype=bool)
    for s, (dr, dc) in _SECTOR_OFFSETS.items():
        fwd = padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
        bwd = padded[1 - dr : 1 - dr + h, 1 - dc : 1 - dc + w]
        keep |= (sector == s) & (mag >= fwd) & (mag > bwd)

    candidates = keep & (mag >= config.tau_low)
    strong = keep & (mag >= config.tau_high)
    labels, n = ndimage.label(candidates, structure=EIGHT_CONNECTED)
    if n == 0:
        return EdgeMap(flags=np.zeros_like(candidates))
    strong_labels = np.unique(labels[strong])
    final = np.isin(labels, strong_labels[strong_labels > 0])
    return EdgeMap(flags=final)


def longest_edge(edges: EdgeMap) -> CoastlinePath:
    """Largest 8-connected edge component; ties broken by the smallest
    (row, col) of the component's topmost-leftmost pixel."""
    labels, n = ndimage.label(edges.flags, structure=EIGHT_CONNECTED)
    if n == 0:
        return CoastlinePath.empty_path(edges.flags.shape)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    best_size = sizes.max()
    candidates = np.flatnonzero(sizes == best_size)
    if len(candidates) == 1:
        chosen = candidates[0]
    else:
        def first_pixel_key(lbl):
            rows, cols = np.nonzero(labels == lbl)
            order = np.lexsort((cols, rows))
            return rows[order[0]], cols[order[0]]

        chosen = min(candidates, key=first_pixel_key)
    rows, cols = np.nonzero(labels == chosen)
    return CoastlinePath(pixels=np.stack([rows, cols], axis=1),
                         grid_shape=edges.flags.shape)


def _distances_to(truth: CoastlinePath, points: np.ndarray) -> np.ndarray:
    grid = np.ones(truth.grid_shape, dtype=bool)
    grid[truth.pixels[:, 0], truth.pixels[:, 1]] = False
    dt = ndimage.distance_transform_edt(grid)
    return dt[points[:, 0], points[:, 1]]


def avg_min_distance(pred: CoastlinePath, truth: CoastlinePath,
                     resolution_m: float = 10.0) -> Tuple[float, float]:
    """Directed mean over predicted pixels of the distance to the nearest
    truth pixel, as (pixels, km).  Undefined for empty inputs."""
    if truth.empty:
        raise MetricUndefinedError("truth coastline is empty")
    if pred.empty:
        raise MetricUndefinedError("predicted coastline is empty")
    if pred.grid_shape != truth.grid_shape:
        raise ShapeError("coastlines live on different grids")
    pixels = float(_distances_to(truth, pred.pixels).mean())
    return pixels, pixels * resolution_m / 1000.0


def symmetric_min_distance(pred: CoastlinePath, truth: CoastlinePath,
                           resolution_m: float = 10.0) -> Tuple[float, float]:
    """Mean of the two directed distances, as (pixels, km)."""
    forward, _ = avg_min_distance(pred, truth, resolution_m)
    backward, _ = avg_min_distance(truth, pred, resolution_m)
    pixels = 0.5 * (forward + backward)
    return pixels, pixels * resolution_m / 1000.0


def save_coastline(path_obj: CoastlinePath, path) -> None:
    """Text export: one ``row,col`` pair per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for row, col in path_obj.pixels:
            fh.write(f"{row},{col}\n")
