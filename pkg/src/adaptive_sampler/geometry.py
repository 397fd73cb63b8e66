"""Floor-plan geometry: ingestion, projection, meshing, AoI buffers, zones.

Coordinates are planar meters unless a function says otherwise.  Polygon
rings are sequences of ``(x, y)`` vertices, open or closed.
"""
from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import shapely
from shapely.geometry import LineString, MultiPolygon, Point, Polygon, box, mapping, shape
from shapely.ops import unary_union

from .config import DEFAULT_AOI_RADII, ELEMENT_KINDS

EARTH_RADIUS = 6378137.0
METERS_PER_DEGREE = EARTH_RADIUS * math.pi / 180.0
PROJECTION_LIMIT = 10_000.0
BOUNDARY_EPS = 1e-9
BUFFER_QUAD_SEGS = 8  # 32 segments per full circle

GEOMETRY_TYPES = ("point", "polyline", "polygon")


@dataclass(frozen=True)
class Space:
    id: str
    polygon: tuple[tuple[float, float], ...]

    @property
    def shape(self) -> Polygon:
        return Polygon(self.polygon)


@dataclass(frozen=True)
class SpatialElement:
    id: str
    kind: str
    geometry_type: str
    coords: tuple[tuple[float, float], ...]
    aoi_radius: float

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.geometry_type not in GEOMETRY_TYPES:
            raise ValueError(f"unknown geometry type {self.geometry_type!r}")
        if not self.aoi_radius > 0:
            raise ValueError(f"element {self.id}: aoi_radius must be > 0, got {self.aoi_radius}")

    @property
    def shape(self):
        pts = [tuple(map(float, c)) for c in self.coords]
        if self.geometry_type == "point" or _is_degenerate(pts):
            return Point(pts[0])
        if self.geometry_type == "polyline":
            return LineString(pts)
        return Polygon(pts)


def _is_degenerate(pts) -> bool:
    return all(math.isclose(p[0], pts[0][0]) and math.isclose(p[1], pts[0][1]) for p in pts)


@dataclass(frozen=True)
class FloorPlan:
    spaces: tuple[Space, ...]
    elements: tuple[SpatialElement, ...]
    anchor: tuple[float, float] = (1.30, 103.77)
    gross_floor_area: float | None = None

    def __post_init__(self):
        if self.gross_floor_area is None:
            area = unary_union([s.shape for s in self.spaces]).area if self.spaces else 0.0
            object.__setattr__(self, "gross_floor_area", float(area))

    @property
    def union(self):
        return unary_union([s.shape for s in self.spaces])

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return self.union.bounds

    def validate(self) -> None:
        """Raise ValueError if any FloorPlan invariant is violated."""
        if not self.spaces:
            raise ValueError("no spaces")
        if not self.gross_floor_area > 0:
            raise ValueError("gross_floor_area must be > 0")
        ids = [s.id for s in self.spaces] + [e.id for e in self.elements]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate element ids")
        for s in self.spaces:
            poly = s.shape
            if not (poly.is_valid and poly.exterior.is_simple):
                raise ValueError(f"space {s.id} is not a simple polygon")
        if self.elements:
            pad = max(e.aoi_radius for e in self.elements)
            minx, miny, maxx, maxy = self.bounds
            frame = box(minx - pad, miny - pad, maxx + pad, maxy + pad)
            for e in self.elements:
                if not frame.covers(e.shape):
                    raise ValueError(f"element {e.id} lies outside the floor-plan frame")


# -- projection -------------------------------------------------------------

def _check_local(x: float, y: float) -> None:
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("non-finite coordinate")
    if abs(x) >= PROJECTION_LIMIT or abs(y) >= PROJECTION_LIMIT:
        raise ValueError("point outside the 10 km local-tangent window")


def project_to_wgs84(point: Sequence[float], anchor: Sequence[float]) -> tuple[float, float]:
    """Local equirectangular projection of metric ``(x, y)`` to ``(lat, lon)``."""
    x, y = float(point[0]), float(point[1])
    lat0, lon0 = float(anchor[0]), float(anchor[1])
    _check_local(x, y)
    if not (math.isfinite(lat0) and math.isfinite(lon0)):
        raise ValueError("non-finite anchor")
    lat = lat0 + y / METERS_PER_DEGREE
    lon = lon0 + x / (METERS_PER_DEGREE * math.cos(math.radians(lat0)))
    return lat, lon


def project_from_wgs84(latlon: Sequence[float], anchor: Sequence[float]) -> tuple[float, float]:
    lat, lon = float(latlon[0]), float(latlon[1])
    lat0, lon0 = float(anchor[0]), float(anchor[1])
    if not all(math.isfinite(v) for v in (lat, lon, lat0, lon0)):
        raise ValueError("non-finite coordinate")
    y = (lat - lat0) * METERS_PER_DEGREE
    x = (lon - lon0) * METERS_PER_DEGREE * math.cos(math.radians(lat0))
    return x, y


# -- point in polygon -------------------------------------------------------

def _ring_array(ring) -> np.ndarray:
    arr = np.asarray(ring, dtype=float)
    if len(arr) > 1 and np.array_equal(arr[0], arr[-1]):
        arr = arr[:-1]
    return arr


def _ring_tests(points: np.ndarray, ring: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (strictly-crossing parity, on-boundary) masks for ``points``."""
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    a = ring
    b = np.roll(ring, -1, axis=0)
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]

    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = straddle & (px < x_cross)
    inside = (np.count_nonzero(crossings, axis=1) % 2) == 1

    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(seg_len2 > 0, ((px - ax) * dx + (py - ay) * dy) / seg_len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    qx = ax + t * dx - px
    qy = ay + t * dy - py
    on_edge = np.any(qx * qx + qy * qy <= BOUNDARY_EPS**2, axis=1)
    return inside, on_edge


def points_in_polygon(points, poly) -> np.ndarray:
    """Vectorised closed-polygon membership (boundary counts as inside).

    ``poly`` is a vertex ring or a shapely Polygon (holes honoured).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(poly, Polygon):
        inside, edge = _ring_tests(pts, _ring_array(poly.exterior.coords))
        result = inside | edge
        for hole in poly.interiors:
            h_in, h_edge = _ring_tests(pts, _ring_array(hole.coords))
            result &= ~(h_in & ~h_edge)
        return result
    inside, edge = _ring_tests(pts, _ring_array(poly))
    return inside | edge


def point_in_polygon(p: Sequence[float], poly) -> bool:
    """Ray-casting test; points on an edge or vertex count as inside."""
    return bool(points_in_polygon([p], poly)[0])


def points_in_geometry(points, geom) -> np.ndarray:
    """Membership for Polygon or MultiPolygon ``geom``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    parts = geom.geoms if isinstance(geom, MultiPolygon) else [geom]
    out = np.zeros(len(pts), dtype=bool)
    for part in parts:
        minx, miny, maxx, maxy = part.bounds
        cand = (
            (pts[:, 0] >= minx - BOUNDARY_EPS) & (pts[:, 0] <= maxx + BOUNDARY_EPS)
            & (pts[:, 1] >= miny - BOUNDARY_EPS) & (pts[:, 1] <= maxy + BOUNDARY_EPS)
            & ~out
        )
        if cand.any():
            idx = np.flatnonzero(cand)
            out[idx] = points_in_polygon(pts[idx], part)
    return out


# -- distances and buffers --------------------------------------------------

def distance_to_element(points, element: SpatialElement) -> np.ndarray:
    """Exact Euclidean distance from each point to the element geometry."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coords = np.asarray(element.coords, dtype=float)
    if element.geometry_type == "point" or _is_degenerate(element.coords):
        return np.hypot(pts[:, 0] - coords[0, 0], pts[:, 1] - coords[0, 1])
    if element.geometry_type == "polygon":
        ring = _ring_array(coords)
        segs_a, segs_b = ring, np.roll(ring, -1, axis=0)
    else:
        segs_a, segs_b = coords[:-1], coords[1:]
    d = _segment_distance(pts, segs_a, segs_b)
    if element.geometry_type == "polygon":
        d = np.where(points_in_polygon(pts, ring), 0.0, d)
    return d


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    px, py = pts[:, 0][:, None], pts[:, 1][:, None]
    dx, dy = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    len2 = dx * dx + dy * dy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(len2 > 0, ((px - a[:, 0]) * dx + (py - a[:, 1]) * dy) / len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(a[:, 0] + t * dx - px, a[:, 1] + t * dy - py).min(axis=1)


def buffer_aoi(element: SpatialElement) -> Polygon:
    """Area-of-influence polygon: geometry dilated by a disc of ``aoi_radius``."""
    if not element.aoi_radius > 0:
        raise ValueError("aoi_radius must be > 0")
    return element.shape.buffer(element.aoi_radius, quad_segs=BUFFER_QUAD_SEGS)


# -- mesh -------------------------------------------------------------------

@dataclass(frozen=True)
class MeshGrid:
    """Uniform square cells whose centroids fall inside the floor plan.

    Cells are stored row-major by centroid (``y`` then ``x``).
    """

    cell_size: float
    origin: tuple[float, float]
    rows: np.ndarray
    cols: np.ndarray
    space_ids: tuple[str | None, ...]

    def __post_init__(self):
        for arr in (self.rows, self.cols):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def cell_ids(self) -> list[str]:
        return [cell_id(r, c) for r, c in zip(self.rows.tolist(), self.cols.tolist())]

    @property
    def centroids(self) -> np.ndarray:
        x0, y0 = self.origin
        return np.column_stack(
            [x0 + (self.cols + 0.5) * self.cell_size, y0 + (self.rows + 0.5) * self.cell_size]
        )

    def cell_square(self, i: int) -> Polygon:
        x0, y0 = self.origin
        c = self.cell_size
        col, row = int(self.cols[i]), int(self.rows[i])
        return box(x0 + col * c, y0 + row * c, x0 + (col + 1) * c, y0 + (row + 1) * c)

    def index(self) -> dict[str, int]:
        return {cid: i for i, cid in enumerate(self.cell_ids)}

    def to_dict(self) -> dict[str, Any]:
        return {
            "cell_size": self.cell_size,
            "origin": list(self.origin),
            "cells": [
                {"cell_id": cell_id(r, c), "row": r, "col": c, "space_id": s}
                for r, c, s in zip(self.rows.tolist(), self.cols.tolist(), self.space_ids)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MeshGrid:
        cells = data["cells"]
        return cls(
            cell_size=float(data["cell_size"]),
            origin=(float(data["origin"][0]), float(data["origin"][1])),
            rows=np.array([c["row"] for c in cells], dtype=np.int64),
            cols=np.array([c["col"] for c in cells], dtype=np.int64),
            space_ids=tuple(c["space_id"] for c in cells),
        )


def cell_id(row: int, col: int) -> str:
    return f"r{row}c{col}"


def discretize(plan: FloorPlan, cell_size: float = 0.5) -> MeshGrid:
    """Overlay a ``cell_size`` grid anchored at the plan's minimum corner.

    A cell is kept iff its centroid lies in some space (boundary inclusive);
    it is attributed to the first such space in plan order.
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be > 0")
    if not plan.spaces:
        raise ValueError("no spaces")
    minx, miny, maxx, maxy = plan.bounds
    ncols = max(1, math.ceil((maxx - minx) / cell_size - 1e-9))
    nrows = max(1, math.ceil((maxy - miny) / cell_size - 1e-9))
    rr, cc = np.meshgrid(np.arange(nrows), np.arange(ncols), indexing="ij")
    rr, cc = rr.ravel(), cc.ravel()
    centroids = np.column_stack([minx + (cc + 0.5) * cell_size, miny + (rr + 0.5) * cell_size])

    owner = np.full(len(rr), -1, dtype=np.int64)
    for k, space in enumerate(plan.spaces):
        free = owner < 0
        if not free.any():
            break
        idx = np.flatnonzero(free)
        hit = points_in_polygon(centroids[idx], space.polygon)
        owner[idx[hit]] = k
    keep = owner >= 0
    return MeshGrid(
        cell_size=float(cell_size),
        origin=(float(minx), float(miny)),
        rows=rr[keep].astype(np.int64),
        cols=cc[keep].astype(np.int64),
        space_ids=tuple(plan.spaces[k].id for k in owner[keep]),
    )


# -- zones ------------------------------------------------------------------

ZONING_METHODS = ("spaces", "square_grid", "build2vec")


@dataclass(frozen=True)
class Zone:
    zone_id: int
    geometry: MultiPolygon
    member_cell_ids: tuple[str, ...]
    label: Any = None

    @property
    def area(self) -> float:
        return self.geometry.area


@dataclass(frozen=True)
class Zoning:
    method: str
    zones: tuple[Zone, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.zones)

    @property
    def area(self) -> float:
        return float(sum(z.area for z in self.zones))

    def cell_labels(self) -> dict[str, int]:
        return {cid: z.zone_id for z in self.zones for cid in z.member_cell_ids}

    def partition(self) -> frozenset[frozenset[str]]:
        """Cell partition as a set of sets, independent of zone numbering."""
        return frozenset(frozenset(z.member_cell_ids) for z in self.zones)

    def locate(self, points) -> np.ndarray:
        """Zone id containing each point (``-1`` if none), by point-in-polygon."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), -1, dtype=np.int64)
        for zone in self.zones:
            todo = out < 0
            if not todo.any():
                break
            idx = np.flatnonzero(todo)
            hit = points_in_geometry(pts[idx], zone.geometry)
            out[idx[hit]] = zone.zone_id
        return out


def _as_multipolygon(geom) -> MultiPolygon:
    if isinstance(geom, MultiPolygon):
        return geom
    if isinstance(geom, Polygon):
        return MultiPolygon([geom])
    polys = [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon)]
    return MultiPolygon(polys)


def dissolve_cells(mesh: MeshGrid, labels: Mapping[str, Any], method: str = "build2vec") -> Zoning:
    """Merge cells sharing a label into one (multi)polygon zone.

    Zone ids are assigned ``0..K-1`` in sorted order of the distinct labels.
    """
    ids = mesh.cell_ids
    missing = [cid for cid in ids if cid not in labels]
    if missing:
        raise KeyError(f"cell {missing[0]} has no label")
    groups: dict[Any, list[int]] = {}
    for i, cid in enumerate(ids):
        groups.setdefault(labels[cid], []).append(i)
    zones = []
    for zone_id, label in enumerate(sorted(groups)):
        members = groups[label]
        squares = [mesh.cell_square(i) for i in members]
        geom = _as_multipolygon(shapely.normalize(unary_union(squares)))
        zones.append(Zone(zone_id, geom, tuple(ids[i] for i in members), label))
    return Zoning(method=method, zones=tuple(zones))


# -- GeoJSON ----------------------------------------------------------------

def _geometry_from_geojson(geom: Mapping[str, Any]) -> tuple[str, tuple[tuple[float, float], ...]]:
    gtype = geom["type"]
    coords = geom["coordinates"]
    if gtype == "Point":
        return "point", ((float(coords[0]), float(coords[1])),)
    if gtype == "LineString":
        return "polyline", tuple((float(x), float(y)) for x, y, *_ in coords)
    if gtype == "Polygon":
        return "polygon", tuple((float(x), float(y)) for x, y, *_ in coords[0])
    raise ValueError(f"unsupported geometry type {gtype}")


def floor_plan_from_geojson(
    data: Mapping[str, Any] | str | Path, radii: Mapping[str, float] | None = None
) -> FloorPlan:
    """Parse a metric GeoJSON FeatureCollection into a validated FloorPlan."""
    if isinstance(data, (str, Path)):
        data = json.loads(Path(data).read_text())
    radii = {**DEFAULT_AOI_RADII, **(radii or {})}
    props = data.get("properties", {}) or {}
    spaces, elements = [], []
    for feat in data["features"]:
        fp = feat.get("properties", {}) or {}
        kind = fp["element_type"]
        gtype, coords = _geometry_from_geojson(feat["geometry"])
        if kind == "space":
            if gtype != "polygon":
                raise ValueError(f"space {fp['id']} must be a Polygon")
            spaces.append(Space(str(fp["id"]), coords))
            continue
        radius = fp.get("aoi_radius")
        if radius is None:
            radius = radii[kind]
        elements.append(SpatialElement(str(fp["id"]), kind, gtype, coords, float(radius)))
    plan = FloorPlan(
        spaces=tuple(spaces),
        elements=tuple(elements),
        anchor=(float(props.get("anchor_lat", 0.0)), float(props.get("anchor_lon", 0.0))),
        gross_floor_area=props.get("gross_floor_area"),
    )
    plan.validate()
    return plan


def _geojson_geometry(gtype: str, coords) -> dict[str, Any]:
    pts = [list(c) for c in coords]
    if gtype == "point":
        return {"type": "Point", "coordinates": pts[0]}
    if gtype == "polyline":
        return {"type": "LineString", "coordinates": pts}
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    return {"type": "Polygon", "coordinates": [pts]}


def floor_plan_to_geojson(plan: FloorPlan) -> dict[str, Any]:
    features = [
        {
            "type": "Feature",
            "properties": {"element_type": "space", "id": s.id},
            "geometry": _geojson_geometry("polygon", s.polygon),
        }
        for s in plan.spaces
    ]
    features += [
        {
            "type": "Feature",
            "properties": {"element_type": e.kind, "id": e.id, "aoi_radius": e.aoi_radius},
            "geometry": _geojson_geometry(e.geometry_type, e.coords),
        }
        for e in plan.elements
    ]
    return {
        "type": "FeatureCollection",
        "properties": {
            "anchor_lat": plan.anchor[0],
            "anchor_lon": plan.anchor[1],
            "gross_floor_area": plan.gross_floor_area,
        },
        "features": features,
    }


def zoning_to_geojson(zoning: Zoning, anchor: Sequence[float] | None = None) -> dict[str, Any]:
    """Export zones; with ``anchor`` the coordinates are projected to WGS84 (lon, lat)."""

    def to_lonlat(xy: np.ndarray) -> np.ndarray:
        return np.array([project_to_wgs84(p, anchor)[::-1] for p in xy]).reshape(-1, 2)

    features = []
    for z in zoning.zones:
        geom = z.geometry
        if anchor is not None:
            geom = shapely.transform(geom, to_lonlat)
        features.append(
            {
                "type": "Feature",
                "properties": {
                    "zoning_method": zoning.method,
                    "zone_id": z.zone_id,
                    "cell_count": len(z.member_cell_ids),
                    "member_cell_ids": list(z.member_cell_ids),
                },
                "geometry": mapping(geom),
            }
        )
    props = {"zoning_method": zoning.method, "crs": "EPSG:4326" if anchor is not None else "local-metric"}
    return {"type": "FeatureCollection", "properties": props, "features": features}


def zoning_from_geojson(data: Mapping[str, Any]) -> Zoning:
    zones = []
    for feat in sorted(data["features"], key=lambda f: f["properties"]["zone_id"]):
        p = feat["properties"]
        zones.append(
            Zone(int(p["zone_id"]), _as_multipolygon(shape(feat["geometry"])), tuple(p["member_cell_ids"]))
        )
    return Zoning(method=data["properties"]["zoning_method"], zones=tuple(zones))


def mirror_plan(plan: FloorPlan, suffix: str = "_m") -> FloorPlan:
    """Plan doubled by reflecting it across the maximum-x edge of its bounds."""
    maxx = plan.bounds[2]

    def refl(coords):
        return tuple((2 * maxx - x, y) for x, y in coords)

    spaces = plan.spaces + tuple(Space(s.id + suffix, refl(s.polygon)[::-1]) for s in plan.spaces)
    elements = plan.elements + tuple(
        SpatialElement(e.id + suffix, e.kind, e.geometry_type, refl(e.coords), e.aoi_radius)
        for e in plan.elements
    )
    return FloorPlan(spaces, elements, plan.anchor, 2 * plan.gross_floor_area)
