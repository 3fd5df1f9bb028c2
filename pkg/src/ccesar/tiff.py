"""Minimal baseline TIFF reader/writer for the SAR data path.

Supports uncompressed, striped, single-plane TIFFs with 1 or 2 samples per
pixel, uint8 or float32 samples, either byte order, and the two GeoTIFF tags
needed to recover a lon/lat bounding box (ModelPixelScale + ModelTiepoint).
Everything else is rejected loudly.
"""

from __future__ import annotations

import logging
import struct
from typing import Optional

import numpy as np

from .errors import MalformedTiffError, UnsupportedTiffError, WriteError
from .raster import Depth, GeoBoundingBox, Raster

log = logging.getLogger(__name__)

TAG_IMAGE_WIDTH = 256
TAG_IMAGE_LENGTH = 257
TAG_BITS_PER_SAMPLE = 258
TAG_COMPRESSION = 259
TAG_PHOTOMETRIC = 262
TAG_STRIP_OFFSETS = 273
TAG_SAMPLES_PER_PIXEL = 277
TAG_ROWS_PER_STRIP = 278
TAG_STRIP_BYTE_COUNTS = 279
TAG_PLANAR_CONFIG = 284
TAG_SAMPLE_FORMAT = 339
TAG_TILE_WIDTH = 322
TAG_TILE_LENGTH = 323
TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922

# TIFF field types: id -> (struct code, byte size)
_FIELD_TYPES = {
    1: ("B", 1),   # BYTE
    3: ("H", 2),   # SHORT
    4: ("I", 4),   # LONG
    11: ("f", 4),  # FLOAT
    12: ("d", 8),  # DOUBLE
}


def _read_entries(buf: bytes, ifd_offset: int, bo: str) -> dict:
    """Parse one IFD into {tag: list of values}."""
    if ifd_offset + 2 > len(buf):
        raise MalformedTiffError("IFD offset beyond end of file")
    (n_entries,) = struct.unpack_from(bo + "H", buf, ifd_offset)
    end = ifd_offset + 2 + 12 * n_entries + 4
    if end > len(buf):
        raise MalformedTiffError("truncated IFD")
    entries = {}
    for i in range(n_entries):
        off = ifd_offset + 2 + 12 * i
        tag, ftype, count = struct.unpack_from(bo + "HHI", buf, off)
        if ftype not in _FIELD_TYPES:
            continue  # unknown field type: skip, per TIFF spec
        code, size = _FIELD_TYPES[ftype]
        total = size * count
        if total <= 4:
            value_off = off + 8
        else:
            (value_off,) = struct.unpack_from(bo + "I", buf, off + 8)
        if value_off + total > len(buf):
            raise MalformedTiffError(f"tag {tag} value offset out of range")
        entries[tag] = list(struct.unpack_from(bo + code * count, buf, value_off))
    return entries


def read_tiff(path) -> Raster:
    """Read a baseline striped TIFF into a Raster.

    NaN float pixels are replaced by 0.0 (count is logged); geo bounding box
    is populated iff both ModelPixelScale and ModelTiepoint are present.
    """
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise MalformedTiffError(f"cannot read {path}: {exc}") from exc

    if len(buf) < 8:
        raise MalformedTiffError("file shorter than TIFF header")
    if buf[:2] == b"II":
        bo = "<"
    elif buf[:2] == b"MM":
        bo = ">"
    else:
        raise MalformedTiffError("bad byte-order mark")
    (magic,) = struct.unpack_from(bo + "H", buf, 2)
    if magic == 43:
        raise UnsupportedTiffError("BigTIFF is not supported")
    if magic != 42:
        raise MalformedTiffError(f"bad magic number {magic}")
    (ifd_offset,) = struct.unpack_from(bo + "I", buf, 4)
    tags = _read_entries(buf, ifd_offset, bo)

    if TAG_TILE_WIDTH in tags or TAG_TILE_LENGTH in tags:
        raise UnsupportedTiffError("tiled TIFF is not supported")
    compression = tags.get(TAG_COMPRESSION, [1])[0]
    if compression != 1:
        raise UnsupportedTiffError(f"compression {compression} is not supported")
    planar = tags.get(TAG_PLANAR_CONFIG, [1])[0]
    if planar != 1:
        raise UnsupportedTiffError("planar (non-interleaved) TIFF is not supported")

    try:
        width = tags[TAG_IMAGE_WIDTH][0]
        height = tags[TAG_IMAGE_LENGTH][0]
        strip_offsets = tags[TAG_STRIP_OFFSETS]
        strip_counts = tags[TAG_STRIP_BYTE_COUNTS]
    except KeyError as exc:
        raise MalformedTiffError(f"required tag missing: {exc}") from exc
    if width < 1 or height < 1:
        raise MalformedTiffError("non-positive image dimensions")

    channels = tags.get(TAG_SAMPLES_PER_PIXEL, [1])[0]
    if channels not in (1, 2):
        raise UnsupportedTiffError(f"{channels} samples/pixel not supported")
    bits = tags.get(TAG_BITS_PER_SAMPLE, [8])
    if len(set(bits)) != 1:
        raise UnsupportedTiffError("mixed bits per sample")
    sample_format = tags.get(TAG_SAMPLE_FORMAT, [1])[0]
    if sample_format == 1 and bits[0] == 8:
        depth, dtype = Depth.U8, np.dtype(np.uint8)
    elif sample_format == 3 and bits[0] == 32:
        depth, dtype = Depth.F32, np.dtype(np.float32)
    else:
        raise UnsupportedTiffError(
            f"sample format {sample_format} / {bits[0]} bits not supported"
        )
    dtype = dtype.newbyteorder(bo)

    if len(strip_offsets) != len(strip_counts):
        raise MalformedTiffError("strip offset/count mismatch")
    data = bytearray()
    for off, cnt in zip(strip_offsets, strip_counts):
        if off + cnt > len(buf):
            raise MalformedTiffError("strip beyond end of file")
        data += buf[off : off + cnt]
    expected = width * height * channels * dtype.itemsize
    if len(data) < expected:
        raise MalformedTiffError(
            f"pixel data too short: {len(data)} bytes for {expected} expected"
        )
    grid = np.frombuffer(bytes(data[:expected]), dtype=dtype)
    grid = grid.astype(dtype.newbyteorder("="), copy=False)
    grid = grid.reshape(height, width, channels)

    if depth is Depth.F32:
        nan_count = int(np.count_nonzero(np.isnan(grid)))
        if nan_count:
            log.warning("replaced %d NaN pixels with 0.0 in %s", nan_count, path)
            grid = np.nan_to_num(grid, nan=0.0)
        if not np.all(np.isfinite(grid)):
            raise MalformedTiffError("infinite pixel values after NaN replacement")

    geo_bbox = _geo_bbox_from_tags(tags, width, height)
    return Raster(pixels=grid, depth=depth, geo_bbox=geo_bbox)


def _geo_bbox_from_tags(tags: dict, width: int, height: int) -> Optional[GeoBoundingBox]:
    scale = tags.get(TAG_MODEL_PIXEL_SCALE)
    tie = tags.get(TAG_MODEL_TIEPOINT)
    if scale is None or tie is None:
        return None
    if len(scale) < 2 or len(tie) < 6:
        raise MalformedTiffError("short GeoTIFF tag")
    sx, sy = scale[0], scale[1]
    i, j, _, x, y, _ = tie[:6]
    min_lon = x - i * sx
    max_lat = y + j * sy
    return GeoBoundingBox(
        min_lon=min_lon,
        min_lat=max_lat - height * sy,
        max_lon=min_lon + width * sx,
        max_lat=max_lat,
    )


def write_tiff(raster: Raster, path) -> None:
    """Write a Raster as a little-endian, uncompressed, single-strip TIFF."""
    px = raster.pixels
    height, width, channels = px.shape
    if raster.depth is Depth.U8:
        bits, sample_format = 8, 1
        payload = px.astype("<u1").tobytes()
    else:
        bits, sample_format = 32, 3
        payload = px.astype("<f4").tobytes()

    entries = [
        (TAG_IMAGE_WIDTH, 4, [width]),
        (TAG_IMAGE_LENGTH, 4, [height]),
        (TAG_BITS_PER_SAMPLE, 3, [bits] * channels),
        (TAG_COMPRESSION, 3, [1]),
        (TAG_PHOTOMETRIC, 3, [1]),
        (TAG_STRIP_OFFSETS, 4, [0]),  # patched below
        (TAG_SAMPLES_PER_PIXEL, 3, [channels]),
        (TAG_ROWS_PER_STRIP, 4, [height]),
        (TAG_STRIP_BYTE_COUNTS, 4, [len(payload)]),
        (TAG_PLANAR_CONFIG, 3, [1]),
        (TAG_SAMPLE_FORMAT, 3, [sample_format] * channels),
    ]
    if raster.geo_bbox is not None:
        bbox = raster.geo_bbox
        sx = bbox.lon_span / width
        sy = bbox.lat_span / height
        entries.append((TAG_MODEL_PIXEL_SCALE, 12, [sx, sy, 0.0]))
        entries.append(
            (TAG_MODEL_TIEPOINT, 12, [0.0, 0.0, 0.0, bbox.min_lon, bbox.max_lat, 0.0])
        )
    entries.sort(key=lambda e: e[0])

    ifd_offset = 8
    ifd_size = 2 + 12 * len(entries) + 4
    extra_offset = ifd_offset + ifd_size
    extra = bytearray()

    def encode_value(ftype, values):
        code, size = _FIELD_TYPES[ftype]
        raw = struct.pack("<" + code * len(values), *values)
        if len(raw) <= 4:
            return raw.ljust(4, b"\0"), None
        nonlocal_offset = extra_offset + len(extra)
        extra.extend(raw)
        return struct.pack("<I", nonlocal_offset), len(raw)

    # first pass to size the external value area, then the pixel data offset
    sized = []
    for tag, ftype, values in entries:
        _, ext = encode_value(ftype, values)
        sized.append((tag, ftype, values))
    data_offset = extra_offset + len(extra)
    extra.clear()

    out = bytearray()
    out += struct.pack("<2sHI", b"II", 42, ifd_offset)
    out += struct.pack("<H", len(sized))
    for tag, ftype, values in sized:
        if tag == TAG_STRIP_OFFSETS:
            values = [data_offset]
        raw, _ = encode_value(ftype, values)
        out += struct.pack("<HHI", tag, ftype, len(values)) + raw
    out += struct.pack("<I", 0)  # no next IFD
    out += extra
    out += payload

    try:
        with open(path, "wb") as fh:
            fh.write(out)
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc
