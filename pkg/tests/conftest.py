import numpy as np
import pytest

from ccesar.raster import BinaryMask, Depth, GeoBoundingBox, Raster


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_f32_raster(pixels, **kwargs):
    arr = np.asarray(pixels, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Raster(pixels=arr, depth=Depth.F32, **kwargs)


def make_u8_raster(pixels, **kwargs):
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Raster(pixels=arr, depth=Depth.U8, **kwargs)


def make_mask(values):
    return BinaryMask(values=np.asarray(values, dtype=np.uint8))


def unit_bbox():
    return GeoBoundingBox(min_lon=0.0, min_lat=0.0, max_lon=1.0, max_lat=1.0)
