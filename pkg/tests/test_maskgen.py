"""Polygon loading, clipping, and rasterization into land/water masks."""

import json

import numpy as np
import pytest

from ccesar.errors import GeoError, PolygonError
from ccesar.maskgen import (Polygon, PolygonSet, clip_polygon_to_box,
                            generate_mask_for_raster, load_polygons,
                            pixel_centers, point_in_rings, rasterize_polygons,
                            ring_area)
from ccesar.raster import Depth, GeoBoundingBox, Raster

from conftest import unit_bbox


def square(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def brute_force_rasterize(polys, bbox, width, height):
    """Per-pixel even-odd point-in-polygon oracle, no scanline machinery."""
    lon, lat = pixel_centers(bbox, width, height)
    out = np.zeros((height, width), dtype=bool)
    for i in range(height):
        for j in range(width):
            inside = False
            for poly in polys.polygons:
                if point_in_rings(lon[j], lat[i], [poly.exterior] + poly.holes):
                    inside = True
                    break
            out[i, j] = inside
    return out


class TestPolygonTypes:
    def test_ring_needs_three_vertices(self):
        with pytest.raises(PolygonError):
            Polygon(exterior=[(0, 0), (1, 1)])

    def test_closing_vertex_dropped(self):
        p = Polygon(exterior=[(0, 0), (1, 0), (1, 1), (0, 0)])
        assert len(p.exterior) == 3

    def test_nan_rejected(self):
        with pytest.raises(PolygonError):
            Polygon(exterior=[(0, 0), (float("nan"), 1), (1, 1)])

    def test_shoelace_unit_square(self):
        assert ring_area(square(0, 0, 1, 1)) == pytest.approx(1.0)
        assert ring_area(list(reversed(square(0, 0, 1, 1)))) == pytest.approx(-1.0)

    def test_shoelace_triangle(self):
        assert ring_area([(0, 0), (4, 0), (0, 3)]) == pytest.approx(6.0)


class TestLoadPolygons:
    def test_text_unit_square(self, tmp_path):
        p = tmp_path / "polys.txt"
        p.write_text("0 0; 1 0; 1 1; 0 1\n")
        ps = load_polygons(p)
        assert len(ps) == 1
        assert len(ps.polygons[0].exterior) == 4

    def test_text_with_hole(self, tmp_path):
        p = tmp_path / "polys.txt"
        p.write_text("0 0; 4 0; 4 4; 0 4 | 1 1; 3 1; 3 3; 1 3\n")
        ps = load_polygons(p)
        assert len(ps.polygons[0].holes) == 1

    def test_text_comments_and_empty(self, tmp_path):
        p = tmp_path / "polys.txt"
        p.write_text("# only comments\n\n")
        assert len(load_polygons(p)) == 0

    def test_geojson_polygon(self, tmp_path):
        doc = {"type": "Polygon",
               "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]]}
        p = tmp_path / "poly.json"
        p.write_text(json.dumps(doc))
        assert len(load_polygons(p)) == 1

    def test_geojson_multipolygon_with_hole(self, tmp_path):
        doc = {"type": "MultiPolygon", "coordinates": [
            [[[0, 0], [4, 0], [4, 4], [0, 4]], [[1, 1], [3, 1], [3, 3], [1, 3]]],
        ]}
        p = tmp_path / "mp.json"
        p.write_text(json.dumps(doc))
        ps = load_polygons(p)
        assert len(ps) == 1
        assert len(ps.polygons[0].holes) == 1

    def test_short_ring_rejected(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("0 0; 1 1\n")
        with pytest.raises(PolygonError):
            load_polygons(p)


class TestClip:
    def test_fully_inside_unchanged(self):
        poly = Polygon(exterior=square(0.2, 0.2, 0.8, 0.8))
        out = clip_polygon_to_box(poly, unit_bbox())
        assert len(out) == 1
        assert set(out.polygons[0].exterior) == set(poly.exterior)

    def test_fully_outside_empty(self):
        poly = Polygon(exterior=square(2, 2, 3, 3))
        assert len(clip_polygon_to_box(poly, unit_bbox())) == 0

    def test_half_overlap_area_by_shoelace(self):
        poly = Polygon(exterior=square(0.5, -1.0, 2.0, 2.0))
        out = clip_polygon_to_box(poly, unit_bbox())
        assert len(out) == 1
        assert abs(ring_area(out.polygons[0].exterior)) == pytest.approx(0.5)

    def test_unit_square_right_half(self):
        bbox = GeoBoundingBox(0.5, 0.0, 1.5, 1.0)
        poly = Polygon(exterior=square(0, 0, 1, 1))
        out = clip_polygon_to_box(poly, bbox)
        assert abs(ring_area(out.polygons[0].exterior)) == pytest.approx(0.5)

    def test_hole_clipped_independently(self):
        poly = Polygon(exterior=square(-1, -1, 2, 2),
                       holes=[square(0.25, 0.25, 0.75, 0.75)])
        out = clip_polygon_to_box(poly, unit_bbox())
        assert len(out.polygons[0].holes) == 1
        assert abs(ring_area(out.polygons[0].holes[0])) == pytest.approx(0.25)

    def test_degenerate_sliver_dropped(self):
        # touches the box only along its edge: zero area after clipping
        poly = Polygon(exterior=square(1.0, 0.0, 2.0, 1.0))
        out = clip_polygon_to_box(poly, unit_bbox())
        assert all(abs(ring_area(p.exterior)) > 0 for p in out.polygons)


class TestRasterize:
    def test_empty_set_all_water(self):
        mask = rasterize_polygons(PolygonSet(), unit_bbox(), 8, 8)
        assert mask.land_fraction == 0.0

    def test_covering_polygon_all_land(self):
        ps = PolygonSet(polygons=[Polygon(exterior=square(-1, -1, 2, 2))])
        mask = rasterize_polygons(ps, unit_bbox(), 8, 8)
        assert mask.land_fraction == 1.0

    def test_western_half_exact_count(self):
        ps = PolygonSet(polygons=[Polygon(exterior=square(0.0, 0.0, 0.5, 1.0))])
        mask = rasterize_polygons(ps, unit_bbox(), 64, 64)
        assert int(np.count_nonzero(mask.values)) == 32 * 64
        assert mask.values[:, :32].min() == 255
        assert mask.values[:, 32:].max() == 0

    def test_row_zero_is_north(self):
        # polygon covers only the northern half (lat > 0.5)
        ps = PolygonSet(polygons=[Polygon(exterior=square(0, 0.5, 1, 1))])
        mask = rasterize_polygons(ps, unit_bbox(), 4, 4)
        assert mask.values[0].min() == 255
        assert mask.values[3].max() == 0

    def test_hole_subtracts_exact_counts(self):
        outer = Polygon(exterior=square(0, 0, 1, 1),
                        holes=[square(0.25, 0.25, 0.75, 0.75)])
        ps = PolygonSet(polygons=[outer])
        mask = rasterize_polygons(ps, unit_bbox(), 32, 32)
        oracle = brute_force_rasterize(ps, unit_bbox(), 32, 32)
        np.testing.assert_array_equal(mask.land(), oracle)
        outer_only = PolygonSet(polygons=[Polygon(exterior=square(0, 0, 1, 1))])
        hole_only = PolygonSet(
            polygons=[Polygon(exterior=square(0.25, 0.25, 0.75, 0.75))])
        n_outer = np.count_nonzero(
            rasterize_polygons(outer_only, unit_bbox(), 32, 32).values)
        n_hole = np.count_nonzero(
            rasterize_polygons(hole_only, unit_bbox(), 32, 32).values)
        assert np.count_nonzero(mask.values) == n_outer - n_hole

    def test_only_binary_values(self):
        ps = PolygonSet(polygons=[Polygon(exterior=[(0, 0), (1, 0.3), (0.4, 1)])])
        mask = rasterize_polygons(ps, unit_bbox(), 16, 16)
        assert set(np.unique(mask.values)) <= {0, 255}

    def test_matches_brute_force_on_random_polygons(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 9))
            angles = np.sort(rng.uniform(0, 2 * np.pi, n))
            radius = rng.uniform(0.1, 0.5, n)
            ring = [(0.5 + r * np.cos(a), 0.5 + r * np.sin(a))
                    for r, a in zip(radius, angles)]
            ps = PolygonSet(polygons=[Polygon(exterior=ring)])
            mask = rasterize_polygons(ps, unit_bbox(), 24, 24)
            oracle = brute_force_rasterize(ps, unit_bbox(), 24, 24)
            np.testing.assert_array_equal(mask.land(), oracle)

    def test_clip_then_rasterize_consistency(self, rng):
        bbox = unit_bbox()
        for _ in range(5):
            x0, y0 = rng.uniform(-0.5, 0.5, 2)
            poly = Polygon(exterior=square(x0, y0, x0 + 0.8, y0 + 0.8))
            direct = rasterize_polygons(PolygonSet(polygons=[poly]), bbox, 20, 20)
            clipped = clip_polygon_to_box(poly, bbox)
            via_clip = rasterize_polygons(clipped, bbox, 20, 20)
            np.testing.assert_array_equal(direct.values, via_clip.values)


class TestGenerateMask:
    def geo_raster(self):
        return Raster(pixels=np.zeros((16, 16, 1), np.uint8), depth=Depth.U8,
                      geo_bbox=unit_bbox())

    def test_missing_bbox_rejected(self):
        r = Raster(pixels=np.zeros((4, 4, 1), np.uint8), depth=Depth.U8)
        with pytest.raises(GeoError):
            generate_mask_for_raster(r, PolygonSet())

    def test_disjoint_polygons_all_water(self):
        ps = PolygonSet(polygons=[Polygon(exterior=square(5, 5, 6, 6))])
        mask = generate_mask_for_raster(self.geo_raster(), ps)
        assert mask.land_fraction == 0.0

    def test_enclosing_polygon_all_land(self):
        ps = PolygonSet(polygons=[Polygon(exterior=square(-2, -2, 3, 3))])
        mask = generate_mask_for_raster(self.geo_raster(), ps)
        assert mask.land_fraction == 1.0

    def test_half_cover_fraction(self):
        ps = PolygonSet(polygons=[Polygon(exterior=square(0, 0, 0.5, 1))])
        mask = generate_mask_for_raster(self.geo_raster(), ps)
        assert mask.land_fraction == pytest.approx(0.5, abs=1.0 / 16)
