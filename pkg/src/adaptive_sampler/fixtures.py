"""Bundled synthetic floor plans used by tests, demos and the CLI."""
from __future__ import annotations

from collections.abc import Mapping

from .config import DEFAULT_AOI_RADII
from .geometry import FloorPlan, Space, SpatialElement, mirror_plan

FIXTURES = ("small", "twin-rooms", "mirrored", "square")


def _rect(x0, y0, x1, y1):
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


class _Builder:
    def __init__(self, radii: Mapping[str, float] | None):
        self.radii = {**DEFAULT_AOI_RADII, **(radii or {})}
        self.spaces: list[Space] = []
        self.elements: list[SpatialElement] = []

    def space(self, sid, x0, y0, x1, y1):
        self.spaces.append(Space(sid, _rect(x0, y0, x1, y1)))

    def point(self, eid, kind, x, y):
        self.elements.append(SpatialElement(eid, kind, "point", ((x, y),), self.radii[kind]))

    def line(self, eid, kind, *pts):
        self.elements.append(SpatialElement(eid, kind, "polyline", tuple(pts), self.radii[kind]))

    def plan(self) -> FloorPlan:
        plan = FloorPlan(tuple(self.spaces), tuple(self.elements))
        plan.validate()
        return plan


def square_room(size: float = 10.0, radii=None, fan: bool = False) -> FloorPlan:
    """One ``size`` x ``size`` space; optionally a ceiling fan at its centre."""
    b = _Builder(radii)
    b.space("room", 0.0, 0.0, size, size)
    if fan:
        b.point("fan", "ceiling_fan", size / 2, size / 2)
    return b.plan()


def _twin_room(b: _Builder, tag: str, ox: float) -> None:
    b.space(f"room_{tag}", ox, 0.0, ox + 5.0, 10.0)
    b.line(f"win_{tag}", "window", (ox + 1.5, 10.0), (ox + 3.5, 10.0))
    b.point(f"fan_{tag}", "ceiling_fan", ox + 2.5, 5.0)
    b.point(f"sfan_{tag}", "stand_fan", ox + 1.0, 1.5)
    b.point(f"ac_{tag}", "ac_outlet", ox + 4.5, 8.0)
    b.line(f"door_{tag}", "door", (ox + 3.0, 0.0), (ox + 4.0, 0.0))
    b.line(f"wallw_{tag}", "wall", (ox, 0.0), (ox, 10.0))
    b.line(f"walle_{tag}", "wall", (ox + 5.0, 0.0), (ox + 5.0, 10.0))


def twin_rooms(radii=None) -> FloorPlan:
    """Two disjoint 5 x 10 m rooms with identical element layouts (400 cells)."""
    b = _Builder(radii)
    _twin_room(b, "a", 0.0)
    _twin_room(b, "b", 8.0)
    return b.plan()


def small_office(radii=None) -> FloorPlan:
    """32 x 16 m office floor: seven rooms off a central corridor."""
    b = _Builder(radii)
    b.space("open_office_s", 0, 0, 16, 7)
    b.space("office_s", 16, 0, 24, 7)
    b.space("meeting_s", 24, 0, 32, 7)
    b.space("corridor", 0, 7, 32, 9)
    b.space("open_office_n", 0, 9, 12, 16)
    b.space("pantry", 12, 9, 18, 16)
    b.space("office_n", 18, 9, 26, 16)
    b.space("meeting_n", 26, 9, 32, 16)

    # facades
    b.line("cw_s", "curtain_wall", (0, 0), (16, 0))
    b.line("win_s1", "window", (18, 0), (22, 0))
    b.line("win_s2", "window", (26, 0), (30, 0))
    b.line("win_n1", "window", (2, 16), (10, 16))
    b.line("cw_n", "curtain_wall", (18, 16), (32, 16))
    b.line("wall_w", "wall", (0, 0), (0, 16))
    b.line("wall_e", "wall", (32, 0), (32, 16))
    b.line("wall_n0", "wall", (10, 16), (18, 16))

    # corridor partitions with door gaps
    b.line("wall_cs1", "wall", (0, 7), (6, 7))
    b.line("wall_cs2", "wall", (8, 7), (18, 7))
    b.line("wall_cs3", "wall", (20, 7), (27, 7))
    b.line("wall_cn1", "wall", (0, 9), (9, 9))
    b.line("wall_cn2", "wall", (11, 9), (14, 9))
    b.line("wall_cn3", "wall", (16, 9), (21, 9))
    b.line("wall_cn4", "wall", (23, 9), (28, 9))
    b.line("door_s1", "door", (6, 7), (8, 7))
    b.line("door_s2", "door", (18, 7), (20, 7))
    b.line("door_s3", "door", (27, 7), (29, 7))
    b.line("door_n1", "door", (9, 9), (11, 9))
    b.line("door_n2", "door", (14, 9), (16, 9))
    b.line("door_n3", "door", (21, 9), (23, 9))
    b.line("door_n4", "door", (28, 9), (30, 9))

    # HVAC
    for i, (x, y) in enumerate([(4, 3.5), (12, 3.5), (4, 12.5)]):
        b.point(f"cfan_{i}", "ceiling_fan", x, y)
    b.point("sfan_0", "stand_fan", 10, 13)
    b.point("sfan_1", "stand_fan", 20, 2)
    for i, (x, y) in enumerate([(22, 5), (30, 3), (24, 12), (30, 14), (15, 12)]):
        b.point(f"ac_{i}", "ac_outlet", x, y)
    b.line("stair", "stair_landing", (30, 7.5), (32, 7.5))
    b.line("desk_0", "furniture", (1, 5), (3, 5))
    b.line("desk_1", "furniture", (13, 5), (15, 5))
    return b.plan()


def load_fixture(name: str, radii=None) -> FloorPlan:
    if name == "small":
        return small_office(radii)
    if name == "twin-rooms":
        return twin_rooms(radii)
    if name == "mirrored":
        return mirror_plan(small_office(radii))
    if name == "square":
        return square_room(radii=radii, fan=True)
    raise ValueError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
