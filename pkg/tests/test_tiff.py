"""Raster file I/O: round trips, fixture parsing, rejection of unsupported files."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccesar.errors import MalformedTiffError, UnsupportedTiffError, WriteError
from ccesar.raster import Depth, GeoBoundingBox, Raster
from ccesar.tiff import read_tiff, write_tiff

from conftest import make_f32_raster, make_u8_raster


def build_tiff(pixels, byte_order="<", compression=1, sample_format=None,
               tiled=False, planar=1, extra_tags=(), truncate_at=None):
    """Independent minimal TIFF builder used as the reader's oracle.

    Written from the TIFF 6.0 layout directly, sharing no code with the
    package writer.
    """
    arr = np.asarray(pixels)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    if arr.dtype == np.uint8:
        bits, fmt = 8, 1
    else:
        arr = arr.astype(np.float32)
        bits, fmt = 32, 3
    if sample_format is None:
        sample_format = fmt
    endian = byte_order
    payload = arr.astype(np.dtype(arr.dtype).newbyteorder(endian)).tobytes()

    tags = [
        (256, 4, [w]),
        (257, 4, [h]),
        (258, 3, [bits] * c),
        (259, 3, [compression]),
        (262, 3, [1]),
        (277, 3, [c]),
        (278, 4, [h]),
        (279, 4, [len(payload)]),
        (284, 3, [planar]),
        (339, 3, [sample_format] * c),
    ]
    if tiled:
        tags.append((322, 4, [16]))
        tags.append((323, 4, [16]))
    tags.extend(extra_tags)
    tags.append((273, 4, [0]))  # strip offsets, patched below
    tags.sort()

    type_size = {1: ("B", 1), 3: ("H", 2), 4: ("I", 4), 11: ("f", 4), 12: ("d", 8)}
    header = struct.pack(endian + "2sHI", b"II" if endian == "<" else b"MM", 42, 8)
    n = len(tags)
    ifd_size = 2 + 12 * n + 4
    overflow = bytearray()
    overflow_base = 8 + ifd_size
    entry_blobs = []
    for tag, ftype, values in tags:
        code, size = type_size[ftype]
        raw = struct.pack(endian + code * len(values), *values)
        if len(raw) <= 4:
            value_field = raw.ljust(4, b"\0")
        else:
            value_field = struct.pack(endian + "I", overflow_base + len(overflow))
            overflow.extend(raw)
        entry_blobs.append((tag, ftype, len(values), value_field))
    data_offset = overflow_base + len(overflow)
    body = struct.pack(endian + "H", n)
    for tag, ftype, count, value_field in entry_blobs:
        if tag == 273:
            value_field = struct.pack(endian + "I", data_offset)
        body += struct.pack(endian + "HHI", tag, ftype, count) + value_field
    body += struct.pack(endian + "I", 0)
    blob = header + body + bytes(overflow) + payload
    if truncate_at is not None:
        blob = blob[:truncate_at]
    return blob


def geo_tags(bbox, w, h):
    sx = (bbox.max_lon - bbox.min_lon) / w
    sy = (bbox.max_lat - bbox.min_lat) / h
    return [
        (33550, 12, [sx, sy, 0.0]),
        (33922, 12, [0.0, 0.0, 0.0, bbox.min_lon, bbox.max_lat, 0.0]),
    ]


class TestReadFixtures:
    def test_minimal_u8_single_pixel(self, tmp_path):
        p = tmp_path / "one.tif"
        p.write_bytes(build_tiff(np.zeros((1, 1), np.uint8)))
        r = read_tiff(p)
        assert r.width == 1 and r.height == 1
        assert r.depth is Depth.U8
        assert r.pixels[0, 0, 0] == 0

    def test_little_endian_f32_values(self, tmp_path):
        grid = np.arange(12, dtype=np.float32).reshape(3, 4) / 7.0
        p = tmp_path / "le.tif"
        p.write_bytes(build_tiff(grid))
        r = read_tiff(p)
        assert r.depth is Depth.F32
        np.testing.assert_array_equal(r.channel(0), grid)

    def test_big_endian_f32_values(self, tmp_path):
        grid = np.arange(12, dtype=np.float32).reshape(4, 3) * 0.25
        p = tmp_path / "be.tif"
        p.write_bytes(build_tiff(grid, byte_order=">"))
        r = read_tiff(p)
        np.testing.assert_array_equal(r.channel(0), grid)

    def test_two_channel_interleaved(self, tmp_path):
        grid = np.random.default_rng(0).integers(0, 256, (5, 6, 2)).astype(np.uint8)
        p = tmp_path / "vvvh.tif"
        p.write_bytes(build_tiff(grid))
        r = read_tiff(p)
        assert r.channels == 2
        np.testing.assert_array_equal(r.pixels, grid)

    def test_geo_bbox_recovered(self, tmp_path):
        bbox = GeoBoundingBox(10.0, 50.0, 10.8, 50.4)
        grid = np.zeros((4, 8), np.uint8)
        p = tmp_path / "geo.tif"
        p.write_bytes(build_tiff(grid, extra_tags=geo_tags(bbox, 8, 4)))
        r = read_tiff(p)
        assert r.geo_bbox is not None
        assert r.geo_bbox.min_lon == pytest.approx(10.0)
        assert r.geo_bbox.max_lon == pytest.approx(10.8)
        assert r.geo_bbox.min_lat == pytest.approx(50.0)
        assert r.geo_bbox.max_lat == pytest.approx(50.4)

    def test_no_geo_tags_means_no_bbox(self, tmp_path):
        p = tmp_path / "plain.tif"
        p.write_bytes(build_tiff(np.zeros((2, 2), np.uint8)))
        assert read_tiff(p).geo_bbox is None

    def test_nan_pixels_replaced_with_zero(self, tmp_path, caplog):
        grid = np.array([[1.0, np.nan], [np.nan, 4.0]], np.float32)
        p = tmp_path / "nan.tif"
        p.write_bytes(build_tiff(grid))
        with caplog.at_level("WARNING"):
            r = read_tiff(p)
        np.testing.assert_array_equal(
            r.channel(0), np.array([[1.0, 0.0], [0.0, 4.0]], np.float32))
        assert "2" in caplog.text


class TestRejection:
    def test_compression_rejected(self, tmp_path):
        p = tmp_path / "lzw.tif"
        p.write_bytes(build_tiff(np.zeros((2, 2), np.uint8), compression=5))
        with pytest.raises(UnsupportedTiffError):
            read_tiff(p)

    def test_tiled_rejected(self, tmp_path):
        p = tmp_path / "tiled.tif"
        p.write_bytes(build_tiff(np.zeros((2, 2), np.uint8), tiled=True))
        with pytest.raises(UnsupportedTiffError):
            read_tiff(p)

    def test_planar_rejected(self, tmp_path):
        p = tmp_path / "planar.tif"
        p.write_bytes(build_tiff(np.zeros((2, 2, 2), np.uint8), planar=2))
        with pytest.raises(UnsupportedTiffError):
            read_tiff(p)

    def test_bigtiff_rejected(self, tmp_path):
        p = tmp_path / "big.tif"
        p.write_bytes(struct.pack("<2sHI", b"II", 43, 8) + b"\0" * 64)
        with pytest.raises(UnsupportedTiffError):
            read_tiff(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.tif"
        p.write_bytes(b"II\x07\x00" + b"\0" * 16)
        with pytest.raises(MalformedTiffError):
            read_tiff(p)

    def test_truncated_ifd(self, tmp_path):
        blob = build_tiff(np.zeros((4, 4), np.uint8))
        p = tmp_path / "trunc.tif"
        p.write_bytes(blob[:20])
        with pytest.raises(MalformedTiffError):
            read_tiff(p)

    def test_truncated_pixel_data(self, tmp_path):
        blob = build_tiff(np.zeros((8, 8), np.uint8))
        p = tmp_path / "short.tif"
        p.write_bytes(blob[:-30])
        with pytest.raises(MalformedTiffError):
            read_tiff(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MalformedTiffError):
            read_tiff(tmp_path / "absent.tif")

    def test_16bit_samples_rejected(self, tmp_path):
        blob = build_tiff(np.zeros((2, 2), np.uint8))
        # patch BitsPerSample 8 -> 16 in the raw entry table
        blob = blob.replace(struct.pack("<HHI", 258, 3, 1) + struct.pack("<H", 8).ljust(4, b"\0"),
                            struct.pack("<HHI", 258, 3, 1) + struct.pack("<H", 16).ljust(4, b"\0"))
        p = tmp_path / "u16.tif"
        p.write_bytes(blob)
        with pytest.raises(UnsupportedTiffError):
            read_tiff(p)


class TestWriteReadRoundTrip:
    def test_u8_checkerboard(self, tmp_path):
        grid = np.indices((8, 8)).sum(axis=0) % 2 * 255
        raster = make_u8_raster(grid)
        p = tmp_path / "cb.tif"
        write_tiff(raster, p)
        assert read_tiff(p) == raster

    def test_f32_ramp(self, tmp_path):
        grid = np.linspace(0, 1, 35, dtype=np.float32).reshape(5, 7)
        raster = make_f32_raster(grid)
        p = tmp_path / "ramp.tif"
        write_tiff(raster, p)
        assert read_tiff(p) == raster

    def test_f32_known_values_4x3(self, tmp_path):
        grid = np.array([[0.5, 1.25, -2.0], [3.5, 0.0, 7.75],
                         [1e-6, 123.456, 8.0], [9.0, 10.0, 11.0]], np.float32)
        raster = make_f32_raster(grid)
        p = tmp_path / "vals.tif"
        write_tiff(raster, p)
        np.testing.assert_array_equal(read_tiff(p).channel(0), grid)

    def test_geo_bbox_round_trip(self, tmp_path):
        bbox = GeoBoundingBox(-1.5, 42.0, 0.5, 43.0)
        raster = make_u8_raster(np.zeros((10, 20), np.uint8), geo_bbox=bbox)
        p = tmp_path / "geo_rt.tif"
        write_tiff(raster, p)
        got = read_tiff(p).geo_bbox
        assert got.min_lon == pytest.approx(bbox.min_lon)
        assert got.max_lat == pytest.approx(bbox.max_lat)
        assert got.lon_span == pytest.approx(bbox.lon_span)
        assert got.lat_span == pytest.approx(bbox.lat_span)

    def test_written_file_readable_by_oracle_layout(self, tmp_path):
        # spot-check the on-disk header against raw struct parsing
        raster = make_u8_raster(np.arange(6, dtype=np.uint8).reshape(2, 3))
        p = tmp_path / "layout.tif"
        write_tiff(raster, p)
        blob = p.read_bytes()
        assert blob[:2] == b"II"
        (magic,) = struct.unpack_from("<H", blob, 2)
        assert magic == 42

    def test_unwritable_path(self, tmp_path):
        raster = make_u8_raster(np.zeros((2, 2), np.uint8))
        with pytest.raises(WriteError):
            write_tiff(raster, tmp_path / "no" / "such" / "dir" / "x.tif")


@settings(max_examples=40, deadline=None)
@given(
    h=st.integers(1, 12),
    w=st.integers(1, 12),
    c=st.integers(1, 2),
    depth=st.sampled_from([Depth.U8, Depth.F32]),
    seed=st.integers(0, 2**31 - 1),
)
def test_round_trip_property(tmp_path_factory, h, w, c, depth, seed):
    rng = np.random.default_rng(seed)
    if depth is Depth.U8:
        grid = rng.integers(0, 256, (h, w, c)).astype(np.uint8)
    else:
        grid = rng.normal(size=(h, w, c)).astype(np.float32)
    raster = Raster(pixels=grid, depth=depth)
    p = tmp_path_factory.mktemp("rt") / "r.tif"
    write_tiff(raster, p)
    back = read_tiff(p)
    assert back == raster
    assert np.all(np.isfinite(back.pixels.astype(np.float64)))
