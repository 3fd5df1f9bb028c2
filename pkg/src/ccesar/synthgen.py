"""Synthetic coastline scenes with exact ground truth.

Two scene families mirror the two coastline classes the workflow separates:

* natural  — smooth fractal boundary, dark water (0.15) against mid-bright
  land (0.6);
* built    — rectilinear stepped boundary with jetty/basin protrusions,
  bright man-made blocks (0.9) scattered over a dark land base, against
  mid-bright harbor water.  The land/water intensity ordering is inverted
  relative to natural scenes, so a single segmentation model must reconcile
  contradictory pixel statistics across classes while class-specific models
  do not.

All intensities are multiplied by gamma-distributed speckle (shape = number
of looks, mean 1), the first-order SAR noise model.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import GenerationError, WriteError
from .manifest import CLASSES, SPLITS, DatasetManifest, ManifestEntry, save_manifest
from .raster import BinaryMask, Depth, Raster
from .tiff import write_tiff

# Class intensity palette (before speckle).  Built scenes invert the
# land/water ordering: calm harbor water returns more than the dark paved
# land base, and only the man-made blocks are bright.
NATURAL_WATER = 0.15
NATURAL_LAND = 0.6
BUILT_WATER = 0.55
BUILT_LAND = 0.25
BUILT_BLOCK = 0.9

MAX_ATTEMPTS = 100


@dataclass
class SynthConfig:
    image_size: int = 64
    n_train_per_class: int = 200
    n_test_per_class: int = 40
    seed: int = 0
    speckle_looks: int = 1
    land_fraction_range: Tuple[float, float] = (0.3, 0.7)
    precision: str = "f32"  # f32 | u8

    def __post_init__(self):
        if self.image_size < 16:
            raise ValueError("image_size must be >= 16")
        if self.n_train_per_class < 1 or self.n_test_per_class < 1:
            raise ValueError("per-class counts must be >= 1")
        lo, hi = self.land_fraction_range
        if not (0.0 < lo < hi < 1.0):
            raise ValueError("land_fraction_range must lie within (0, 1)")
        if self.speckle_looks < 1:
            raise ValueError("speckle_looks must be a positive integer")
        if self.precision not in ("f32", "u8"):
            raise ValueError("precision must be 'f32' or 'u8'")


def _midpoint_displacement(rng: np.random.Generator, size: int,
                           roughness: float = 0.5, octaves: int = 5) -> np.ndarray:
    """1-D fractal boundary height per column, in pixel units."""
    pts = rng.uniform(0.35, 0.65, size=2) * size
    amplitude = 0.35 * size
    for _ in range(octaves):
        mids = 0.5 * (pts[:-1] + pts[1:]) + rng.uniform(-amplitude, amplitude, size=len(pts) - 1)
        merged = np.empty(2 * len(pts) - 1)
        merged[0::2] = pts
        merged[1::2] = mids
        pts = merged
        amplitude *= 2.0 ** (-roughness)
    xs = np.linspace(0, len(pts) - 1, size)
    boundary = np.interp(xs, np.arange(len(pts)), pts)
    return np.clip(boundary, 2, size - 2)


def _apply_orientation(mask: np.ndarray, orientation: int) -> np.ndarray:
    """Map 'land at bottom' to one of four scene orientations."""
    if orientation == 1:
        mask = mask[::-1, :]
    elif orientation == 2:
        mask = mask.T
    elif orientation == 3:
        mask = mask.T[:, ::-1]
    return np.ascontiguousarray(mask)


def _speckle(rng: np.random.Generator, base: np.ndarray, looks: int) -> np.ndarray:
    noise = rng.gamma(shape=looks, scale=1.0 / looks, size=base.shape)
    return (base * noise).astype(np.float32)


def _land_fraction_ok(land: np.ndarray, frange: Tuple[float, float]) -> bool:
    frac = land.mean()
    return frange[0] <= frac <= frange[1]


def generate_natural(seed: int, size: int = 64, *,
                     speckle_looks: int = 1,
                     land_fraction_range: Tuple[float, float] = (0.3, 0.7),
                     ) -> Tuple[Raster, BinaryMask]:
    """Smooth-coast scene from 1-D midpoint displacement (roughness 0.5, 5 octaves)."""
    if size < 16:
        raise GenerationError("size must be >= 16")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    rows = np.arange(size)[:, None]
    for _ in range(MAX_ATTEMPTS):
        boundary = _midpoint_displacement(rng, size)
        land = rows >= boundary[None, :]
        if _land_fraction_ok(land, land_fraction_range):
            break
    else:
        raise GenerationError("could not satisfy land fraction range in 100 attempts")
    land = _apply_orientation(land, int(rng.integers(0, 4)))
    base = np.where(land, NATURAL_LAND, NATURAL_WATER)
    image = _speckle(rng, base, speckle_looks)
    raster = Raster(pixels=image[:, :, None], depth=Depth.F32)
    return raster, BinaryMask(values=land.astype(np.uint8) * 255)


def _stepped_boundary(rng: np.random.Generator, size: int,
                      min_plateau: int = 4, max_plateau: int = 12) -> np.ndarray:
    """Piecewise-constant boundary height: axis-aligned steps only."""
    levels = []
    level = float(rng.uniform(0.35, 0.65) * size)
    col = 0
    boundary = np.empty(size)
    while col < size:
        run = int(rng.integers(min_plateau, max_plateau + 1))
        if size - col - run < min_plateau:
            run = size - col  # absorb the tail so no short plateau remains
        boundary[col : col + run] = round(level)
        levels.append(round(level))
        col += run
        step = rng.choice([-1, 1]) * rng.integers(2, 7)
        level = float(np.clip(level + step, 0.25 * size, 0.75 * size))
    return np.clip(boundary, 2, size - 2)


def _add_protrusions(rng: np.random.Generator, land: np.ndarray,
                     boundary: np.ndarray) -> None:
    """Carve 1-3 rectangular jetties (land into water) or basins (water into land)."""
    size = land.shape[0]
    for _ in range(int(rng.integers(1, 4))):
        w = int(rng.integers(3, max(4, size // 8) + 1))
        c0 = int(rng.integers(1, size - w - 1))
        h = int(rng.integers(3, max(4, size // 6) + 1))
        b = int(boundary[c0 : c0 + w].min())
        if rng.random() < 0.5:
            top = max(2, b - h)
            land[top:b, c0 : c0 + w] = True       # jetty reaching into water
        else:
            b_max = int(boundary[c0 : c0 + w].max())
            bottom = min(size - 2, b_max + h)
            land[b_max:bottom, c0 : c0 + w] = False  # basin cut into land


def generate_built(seed: int, size: int = 64, *,
                   speckle_looks: int = 1,
                   land_fraction_range: Tuple[float, float] = (0.3, 0.7),
                   ) -> Tuple[Raster, BinaryMask]:
    """Harbor-style scene: stepped boundary, bright blocks on dark land, mid-bright water."""
    if size < 16:
        raise GenerationError("size must be >= 16")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    rows = np.arange(size)[:, None]
    for _ in range(MAX_ATTEMPTS):
        boundary = _stepped_boundary(rng, size)
        land = rows >= boundary[None, :]
        _add_protrusions(rng, land, boundary)
        if _land_fraction_ok(land, land_fraction_range):
            break
    else:
        raise GenerationError("could not satisfy land fraction range in 100 attempts")

    base = np.where(land, BUILT_LAND, BUILT_WATER)
    for _ in range(int(rng.integers(3, 7))):     # urban blocks on the land side
        h = int(rng.integers(3, max(4, size // 6) + 1))
        w = int(rng.integers(3, max(4, size // 6) + 1))
        for _ in range(MAX_ATTEMPTS):
            r0 = int(rng.integers(0, size - h))
            c0 = int(rng.integers(0, size - w))
            patch = land[r0 : r0 + h, c0 : c0 + w]
            if patch.mean() >= 0.6:              # anchor structures to land
                block = np.zeros_like(land)
                block[r0 : r0 + h, c0 : c0 + w] = True
                base[block & land] = BUILT_BLOCK
                break

    orientation = int(rng.integers(0, 4))
    land = _apply_orientation(land, orientation)
    base = _apply_orientation(base, orientation)
    image = _speckle(rng, base, speckle_looks)
    raster = Raster(pixels=image[:, :, None], depth=Depth.F32)
    return raster, BinaryMask(values=land.astype(np.uint8) * 255)


def quantize_u8(raster: Raster) -> Raster:
    """Per-image min-max quantization of an F32 raster to 8 bits."""
    px = raster.pixels.astype(np.float64)
    lo, hi = px.min(), px.max()
    scaled = np.zeros_like(px) if hi == lo else (px - lo) / (hi - lo) * 255.0
    return Raster(
        pixels=np.rint(scaled).astype(np.uint8),
        depth=Depth.U8,
        ground_resolution_m=raster.ground_resolution_m,
        geo_bbox=raster.geo_bbox,
    )


_GENERATORS = {"natural": generate_natural, "built": generate_built}


def generate_scene(class_label: str, seed: int, size: int = 64, *,
                   speckle_looks: int = 1,
                   land_fraction_range: Tuple[float, float] = (0.3, 0.7),
                   ) -> Tuple[Raster, BinaryMask]:
    return _GENERATORS[class_label](
        seed, size, speckle_looks=speckle_looks,
        land_fraction_range=land_fraction_range,
    )


def _entry_seed(base_seed: int, class_idx: int, split_idx: int, index: int) -> int:
    # per-image seed stream: independent of generation order, so parallel
    # generation cannot change outputs
    ss = np.random.SeedSequence(entropy=base_seed,
                                spawn_key=(class_idx, split_idx, index))
    return int(ss.generate_state(1)[0])


def generate_dataset(config: SynthConfig, out_dir) -> DatasetManifest:
    """Write one precision variant of the synthetic corpus plus its manifest."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for class_idx, class_label in enumerate(CLASSES):
        for split_idx, split in enumerate(SPLITS):
            count = config.n_train_per_class if split == "train" else config.n_test_per_class
            for i in range(count):
                seed = _entry_seed(config.seed, class_idx, split_idx, i)
                raster, mask = generate_scene(
                    class_label, seed, config.image_size,
                    speckle_looks=config.speckle_looks,
                    land_fraction_range=config.land_fraction_range,
                )
                if config.precision == "u8":
                    raster = quantize_u8(raster)
                stem = f"{class_label}_{split}_{i:04d}"
                image_name = stem + ".tif"
                mask_name = stem + "_mask.tif"
                mask_raster = Raster(pixels=mask.values[:, :, None], depth=Depth.U8)
                try:
                    write_tiff(raster, os.path.join(out_dir, image_name))
                    write_tiff(mask_raster, os.path.join(out_dir, mask_name))
                except OSError as exc:
                    raise WriteError(f"cannot write into {out_dir}: {exc}") from exc
                entries.append(ManifestEntry(image_name, mask_name, class_label, split))
    manifest = DatasetManifest(entries=entries)
    save_manifest(manifest, os.path.join(out_dir, "manifest.txt"))
    return manifest
