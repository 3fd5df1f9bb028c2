"""Ground-truth mask generation: clip land polygons to a scene and rasterize.

Geometry is planar (lon/lat treated as Cartesian).  Pixel-center membership
with an even-odd rule defines land; a point exactly on a polygon edge counts
as inside via the <= comparison on the left crossing.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import GeoError, PolygonError
from .raster import BinaryMask, GeoBoundingBox, Raster

log = logging.getLogger(__name__)

Ring = List[Tuple[float, float]]


def ring_area(ring: Sequence[Tuple[float, float]]) -> float:
    """Signed shoelace area of an implicitly closed ring."""
    total = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return 0.5 * total


def _validate_ring(ring: Sequence[Tuple[float, float]]) -> Ring:
    pts = [(float(x), float(y)) for x, y in ring]
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]  # stored rings are implicitly closed
    if len(pts) < 3:
        raise PolygonError(f"ring needs >= 3 vertices, got {len(pts)}")
    if any(math.isnan(x) or math.isnan(y) for x, y in pts):
        raise PolygonError("NaN coordinate in ring")
    return pts


@dataclass
class Polygon:
    exterior: Ring
    holes: List[Ring] = field(default_factory=list)

    def __post_init__(self):
        self.exterior = _validate_ring(self.exterior)
        self.holes = [_validate_ring(h) for h in self.holes]

    def rings(self) -> List[Ring]:
        return [self.exterior] + self.holes


@dataclass
class PolygonSet:
    polygons: List[Polygon] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.polygons)


def _parse_text_ring(text: str) -> Ring:
    pts = []
    for pair in text.split(";"):
        pair = pair.strip()
        if not pair:
            continue
        tokens = pair.split()
        if len(tokens) != 2:
            raise PolygonError(f"bad vertex {pair!r}")
        pts.append((float(tokens[0]), float(tokens[1])))
    return pts


def _polygons_from_geojson(doc: dict) -> List[Polygon]:
    def from_coords(coords) -> Polygon:
        return Polygon(exterior=coords[0], holes=list(coords[1:]))

    gtype = doc.get("type")
    if gtype == "Polygon":
        return [from_coords(doc["coordinates"])]
    if gtype == "MultiPolygon":
        return [from_coords(c) for c in doc["coordinates"]]
    if gtype == "Feature":
        return _polygons_from_geojson(doc["geometry"])
    if gtype in ("FeatureCollection", "GeometryCollection"):
        items = doc.get("features") or doc.get("geometries") or []
        out = []
        for item in items:
            out.extend(_polygons_from_geojson(item))
        return out
    raise PolygonError(f"unsupported GeoJSON type {gtype!r}")


def load_polygons(path) -> PolygonSet:
    """Load polygons from the text format or a GeoJSON document.

    Text format: one polygon per line, ``lon lat; lon lat; ...`` with ``|``
    separating the exterior ring from hole rings; ``#`` starts a comment.
    """
    if not os.path.isfile(path):
        raise PolygonError(f"polygon file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    stripped = content.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(content)
        except json.JSONDecodeError as exc:
            raise PolygonError(f"bad GeoJSON: {exc}") from exc
        return PolygonSet(polygons=_polygons_from_geojson(doc))
    polygons = []
    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rings = [_parse_text_ring(part) for part in line.split("|")]
            polygons.append(Polygon(exterior=rings[0], holes=rings[1:]))
        except PolygonError as exc:
            raise PolygonError(f"{path}:{lineno}: {exc}") from exc
    return PolygonSet(polygons=polygons)


# ---------------------------------------------------------------------------
# Sutherland-Hodgman clipping

def _clip_ring_halfplane(ring: Ring, inside, intersect) -> Ring:
    out: Ring = []
    n = len(ring)
    for i in range(n):
        cur = ring[i]
        prev = ring[i - 1]
        cur_in = inside(cur)
        prev_in = inside(prev)
        if cur_in:
            if not prev_in:
                out.append(intersect(prev, cur))
            out.append(cur)
        elif prev_in:
            out.append(intersect(prev, cur))
    return out


def _clip_ring_to_box(ring: Ring, bbox: GeoBoundingBox) -> Ring:
    def x_edge(bound, keep_ge):
        def inside(p):
            return p[0] >= bound if keep_ge else p[0] <= bound

        def intersect(a, b):
            t = (bound - a[0]) / (b[0] - a[0])
            return (bound, a[1] + t * (b[1] - a[1]))

        return inside, intersect

    def y_edge(bound, keep_ge):
        def inside(p):
            return p[1] >= bound if keep_ge else p[1] <= bound

        def intersect(a, b):
            t = (bound - a[1]) / (b[1] - a[1])
            return (a[0] + t * (b[0] - a[0]), bound)

        return inside, intersect

    for inside, intersect in (
        x_edge(bbox.min_lon, True),
        x_edge(bbox.max_lon, False),
        y_edge(bbox.min_lat, True),
        y_edge(bbox.max_lat, False),
    ):
        ring = _clip_ring_halfplane(ring, inside, intersect)
        if not ring:
            return []
    return ring


def clip_polygon_to_box(polygon: Polygon, bbox: GeoBoundingBox) -> PolygonSet:
    """Clip exterior and hole rings independently against the 4 box edges;
    degenerate (zero-area) results are dropped."""
    exterior = _clip_ring_to_box(list(polygon.exterior), bbox)
    if len(exterior) < 3 or ring_area(exterior) == 0.0:
        return PolygonSet()
    holes = []
    for hole in polygon.holes:
        clipped = _clip_ring_to_box(list(hole), bbox)
        if len(clipped) >= 3 and ring_area(clipped) != 0.0:
            holes.append(clipped)
    return PolygonSet(polygons=[Polygon(exterior=exterior, holes=holes)])


# ---------------------------------------------------------------------------
# Rasterization

def point_in_rings(px: float, py: float, rings: Sequence[Ring]) -> bool:
    """Even-odd membership over a polygon's rings (holes subtract).

    Crossings are counted on the leftward ray with <= comparisons, so points
    exactly on an edge count as inside.
    """
    crossings = 0
    for ring in rings:
        n = len(ring)
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            if (y1 <= py < y2) or (y2 <= py < y1):
                x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                if x_cross <= px:
                    crossings += 1
    return crossings % 2 == 1


def pixel_centers(bbox: GeoBoundingBox, width: int, height: int):
    """(lon array per column, lat array per row); row 0 is the north edge."""
    lon = bbox.min_lon + (np.arange(width) + 0.5) * (bbox.lon_span / width)
    lat = bbox.max_lat - (np.arange(height) + 0.5) * (bbox.lat_span / height)
    return lon, lat


def rasterize_polygons(polys: PolygonSet, bbox: GeoBoundingBox,
                       width: int, height: int) -> BinaryMask:
    """Scanline even-odd fill at pixel centers; land=255, water=0."""
    if width < 1 or height < 1:
        raise ValueError("mask dimensions must be >= 1")
    lon, lat = pixel_centers(bbox, width, height)
    land = np.zeros((height, width), dtype=bool)
    for polygon in polys.polygons:
        edges = []
        for ring in polygon.rings():
            n = len(ring)
            for i in range(n):
                edges.append((ring[i], ring[(i + 1) % n]))
        inside = np.zeros((height, width), dtype=bool)
        for row in range(height):
            py = lat[row]
            crossings = []
            for (x1, y1), (x2, y2) in edges:
                if (y1 <= py < y2) or (y2 <= py < y1):
                    crossings.append(x1 + (py - y1) * (x2 - x1) / (y2 - y1))
            if not crossings:
                continue
            xs = np.sort(np.asarray(crossings))
            # parity of the number of crossings at or left of each center
            counts = np.searchsorted(xs, lon, side="right")
            inside[row] = counts % 2 == 1
        land |= inside
    return BinaryMask(values=land.astype(np.uint8) * 255)


def generate_mask_for_raster(raster: Raster, land: PolygonSet) -> BinaryMask:
    """Clip every land polygon to the raster's bounds and rasterize."""
    if raster.geo_bbox is None:
        raise GeoError("raster has no geographic bounding box")
    clipped = []
    for polygon in land.polygons:
        clipped.extend(clip_polygon_to_box(polygon, raster.geo_bbox).polygons)
    mask = rasterize_polygons(PolygonSet(polygons=clipped), raster.geo_bbox,
                              raster.width, raster.height)
    if not mask.values.any():
        log.warning("scene is entirely water: no polygon intersects its bounds")
    return mask
