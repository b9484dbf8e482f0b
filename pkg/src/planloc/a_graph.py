"""Floor-plan ingestion and construction of the architectural graph (A-Graph).

A floor plan describes wall slabs (centerline segment plus thickness),
rectangular rooms referencing four wall surfaces, and doorways connecting
room pairs. Each wall slab contributes two parallel wall surfaces; surfaces
are identified as ``"<wall_id>:+"`` / ``"<wall_id>:-"`` for the face on the
left / right of the wall direction.

The resulting A-Graph is a factor graph over wall-surface planes, wall
centers, room centers and doorway positions in the plan frame "B". A valid
plan always produces a graph whose total cost is zero at the initial values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .factor_graph import Factor, FactorGraph, FactorKind, VariableId, VarKind
from .geometry import (
    Axis,
    GeometryError,
    PERP,
    Plane,
    classify_axis,
    normalize_away_from_origin,
)

ROOM_SIDES = ("px", "mx", "py", "my")


class PlanError(ValueError):
    """Floor-plan file failed to parse or validate."""


@dataclass(frozen=True)
class PlanWall:
    id: str
    start: tuple[float, float]
    end: tuple[float, float]
    thickness: float

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    def direction(self) -> np.ndarray:
        d = np.array([self.end[0] - self.start[0], self.end[1] - self.start[1]])
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class PlanRoom:
    id: str
    surfaces: dict[str, str]  # side ("px","mx","py","my") -> surface id


@dataclass(frozen=True)
class PlanDoorway:
    id: str
    position: tuple[float, float]
    rooms: tuple[str, str]


@dataclass(frozen=True)
class WallSurface:
    """One face of a wall slab, with both graph and simulation geometry."""

    id: str
    wall_id: str
    plane: Plane  # canonical closest-point form in frame B
    face_normal: tuple[float, float]  # outward from the slab material
    seg_start: tuple[float, float]
    seg_end: tuple[float, float]
    axis: Axis


@dataclass(frozen=True)
class FloorPlan:
    walls: tuple[PlanWall, ...]
    rooms: tuple[PlanRoom, ...]
    doorways: tuple[PlanDoorway, ...]

    def wall(self, wall_id: str) -> PlanWall:
        for w in self.walls:
            if w.id == wall_id:
                return w
        raise PlanError(f"unknown wall id {wall_id!r}")

    def room(self, room_id: str) -> PlanRoom:
        for r in self.rooms:
            if r.id == room_id:
                return r
        raise PlanError(f"unknown room id {room_id!r}")

    def room_rect(self, room_id: str) -> tuple[float, float, float, float]:
        """Interior rectangle (x0, x1, y0, y1) spanned by a room's surfaces."""
        surfaces = wall_surfaces(self)
        room = self.room(room_id)
        px = _axis_position(surfaces[room.surfaces["px"]])
        mx = _axis_position(surfaces[room.surfaces["mx"]])
        py = _axis_position(surfaces[room.surfaces["py"]])
        my = _axis_position(surfaces[room.surfaces["my"]])
        return (mx, px, my, py)


def _axis_position(surface: WallSurface) -> float:
    """Signed coordinate of an axis-aligned surface along its normal axis."""
    n = surface.plane.normal
    axis = surface.axis
    comp = n[0] if axis == Axis.X else n[1]
    if abs(comp) < 0.9:
        raise PlanError(f"surface {surface.id} is not axis aligned")
    return surface.plane.dist / comp


def _surfaces_of_wall(wall: PlanWall) -> list[WallSurface]:
    if wall.length <= 0:
        raise PlanError(f"wall {wall.id!r} has zero length")
    if wall.thickness <= 0:
        raise PlanError(f"wall {wall.id!r} has non-positive thickness")
    u = wall.direction()
    nu = PERP @ u  # left of the wall direction
    start = np.asarray(wall.start, float)
    end = np.asarray(wall.end, float)
    out = []
    for sign, tag in ((1.0, "+"), (-1.0, "-")):
        face_n = sign * nu
        offset = (wall.thickness / 2.0) * face_n
        s0 = start + offset
        s1 = end + offset
        d_signed = float(face_n @ s0)
        plane = normalize_away_from_origin(face_n, d_signed)
        out.append(
            WallSurface(
                id=f"{wall.id}:{tag}",
                wall_id=wall.id,
                plane=plane,
                face_normal=(float(face_n[0]), float(face_n[1])),
                seg_start=(float(s0[0]), float(s0[1])),
                seg_end=(float(s1[0]), float(s1[1])),
                axis=classify_axis(plane),
            )
        )
    return out


def wall_surfaces(plan: FloorPlan) -> dict[str, WallSurface]:
    """All wall surfaces of a plan, keyed by surface id."""
    out: dict[str, WallSurface] = {}
    for wall in plan.walls:
        for surf in _surfaces_of_wall(wall):
            out[surf.id] = surf
    return out


def extract_wall_surfaces(plan: FloorPlan) -> list[tuple[str, Plane, Plane, Axis]]:
    """Per wall: its two parallel surface planes (offset +/- thickness/2) and axis."""
    out = []
    for wall in plan.walls:
        plus, minus = _surfaces_of_wall(wall)
        out.append((wall.id, plus.plane, minus.plane, plus.axis))
    return out


def compute_wall_center(p1: Plane, p2: Plane, s) -> np.ndarray:
    """Wall center from two opposed surfaces and the wall start point.

    The center sits midway between the two surfaces' perpendicular feet,
    shifted along the wall direction to the start point's projection.
    """
    if classify_axis(p1) != classify_axis(p2):
        raise GeometryError("wall surfaces must share the same axis")
    s = np.asarray(s, dtype=float)
    w = 0.5 * (p1.dist * p1.normal + p2.dist * p2.normal)
    nw = float(np.linalg.norm(w))
    what = p1.normal if nw < 1e-9 else w / nw
    return w + s - float(s @ what) * what


def _parse_point(obj, where: str) -> tuple[float, float]:
    if not isinstance(obj, (list, tuple)) or len(obj) != 2:
        raise PlanError(f"{where}: expected [x, y], got {obj!r}")
    return (float(obj[0]), float(obj[1]))


def plan_from_dict(doc: dict) -> FloorPlan:
    """Build and validate a FloorPlan from parsed JSON."""
    if not isinstance(doc, dict):
        raise PlanError("plan document must be a JSON object")
    walls = []
    for i, w in enumerate(doc.get("walls", [])):
        where = f"walls[{i}]"
        try:
            walls.append(
                PlanWall(
                    id=str(w["id"]),
                    start=_parse_point(w["start"], where),
                    end=_parse_point(w["end"], where),
                    thickness=float(w["thickness"]),
                )
            )
        except KeyError as exc:
            raise PlanError(f"{where}: missing field {exc.args[0]!r}") from None
    rooms = []
    for i, r in enumerate(doc.get("rooms", [])):
        where = f"rooms[{i}]"
        try:
            surfaces = {side: str(r["surfaces"][side]) for side in ROOM_SIDES}
            rooms.append(PlanRoom(id=str(r["id"]), surfaces=surfaces))
        except KeyError as exc:
            raise PlanError(f"{where}: missing field {exc.args[0]!r}") from None
    doorways = []
    for i, d in enumerate(doc.get("doorways", [])):
        where = f"doorways[{i}]"
        try:
            room_ids = [str(x) for x in d["rooms"]]
            if len(room_ids) != 2:
                raise PlanError(f"{where}: doorway must reference exactly 2 rooms")
            doorways.append(
                PlanDoorway(
                    id=str(d["id"]),
                    position=_parse_point(d["position"], where),
                    rooms=(room_ids[0], room_ids[1]),
                )
            )
        except KeyError as exc:
            raise PlanError(f"{where}: missing field {exc.args[0]!r}") from None
    plan = FloorPlan(tuple(walls), tuple(rooms), tuple(doorways))
    validate_plan(plan)
    return plan


def load_plan(path) -> FloorPlan:
    """Load and validate a floor-plan JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PlanError(f"cannot read plan file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return plan_from_dict(doc)


def validate_plan(plan: FloorPlan) -> None:
    seen_walls = set()
    for wall in plan.walls:
        if wall.id in seen_walls:
            raise PlanError(f"duplicate wall id {wall.id!r}")
        seen_walls.add(wall.id)
        if wall.length <= 0:
            raise PlanError(f"wall {wall.id!r} has zero length")
        if wall.thickness <= 0:
            raise PlanError(f"wall {wall.id!r} has non-positive thickness")
    surfaces = wall_surfaces(plan)

    seen_rooms = set()
    for room in plan.rooms:
        if room.id in seen_rooms:
            raise PlanError(f"duplicate room id {room.id!r}")
        seen_rooms.add(room.id)
        for side in ROOM_SIDES:
            sid = room.surfaces[side]
            if sid not in surfaces:
                raise PlanError(f"room {room.id!r} references missing surface {sid!r}")
        px = surfaces[room.surfaces["px"]]
        mx = surfaces[room.surfaces["mx"]]
        py = surfaces[room.surfaces["py"]]
        my = surfaces[room.surfaces["my"]]
        for side, surf, want_axis in (
            ("px", px, Axis.X),
            ("mx", mx, Axis.X),
            ("py", py, Axis.Y),
            ("my", my, Axis.Y),
        ):
            if surf.axis != want_axis:
                raise PlanError(
                    f"room {room.id!r} side {side} expects a {want_axis.value}-surface, "
                    f"got {surf.id!r}"
                )
        x1, x0, y1, y0 = (
            _axis_position(px),
            _axis_position(mx),
            _axis_position(py),
            _axis_position(my),
        )
        if not (x0 < x1 and y0 < y1):
            raise PlanError(f"room {room.id!r} surfaces do not form a positive-area rectangle")
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        for side, surf in (("px", px), ("mx", mx), ("py", py), ("my", my)):
            fn = np.asarray(surf.face_normal)
            mid = (np.asarray(surf.seg_start) + np.asarray(surf.seg_end)) / 2.0
            if float(fn @ (np.array([cx, cy]) - mid)) <= 0:
                raise PlanError(
                    f"room {room.id!r}: surface {surf.id!r} does not face the room interior"
                )

    seen_doorways = set()
    for doorway in plan.doorways:
        if doorway.id in seen_doorways:
            raise PlanError(f"duplicate doorway id {doorway.id!r}")
        seen_doorways.add(doorway.id)
        r1, r2 = doorway.rooms
        if r1 == r2:
            raise PlanError(f"doorway {doorway.id!r} must connect two distinct rooms")
        if r1 not in seen_rooms or r2 not in seen_rooms:
            raise PlanError(f"doorway {doorway.id!r} references a missing room")
        wall = shared_wall(plan, r1, r2)
        if wall is None:
            raise PlanError(f"doorway {doorway.id!r}: rooms {r1!r} and {r2!r} share no wall")
        dist = _point_segment_distance(
            np.asarray(doorway.position), np.asarray(wall.start), np.asarray(wall.end)
        )
        if dist > 0.5:
            raise PlanError(
                f"doorway {doorway.id!r} lies {dist:.2f} m from the shared wall {wall.id!r}"
            )


def shared_wall(plan: FloorPlan, room1: str, room2: str) -> PlanWall | None:
    """The wall whose two faces are referenced by the two rooms, if any."""
    s1 = set(plan.room(room1).surfaces.values())
    s2 = set(plan.room(room2).surfaces.values())
    for wall in plan.walls:
        faces = {f"{wall.id}:+", f"{wall.id}:-"}
        if (faces & s1) and (faces & s2) and (faces & s1) != (faces & s2):
            return wall
    return None


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    t = float(np.clip(((p - a) @ ab) / float(ab @ ab), 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


@dataclass
class AGraph:
    """Optimizable graph of a floor plan: wall surfaces, walls, rooms, doorways."""

    plan: FloorPlan
    graph: FactorGraph
    plane_ids: dict[str, VariableId]  # surface id -> plane variable
    wall_ids: dict[str, VariableId]
    room_ids: dict[str, VariableId]
    doorway_ids: dict[str, VariableId]
    surfaces: dict[str, WallSurface] = field(default_factory=dict)

    def plane_of(self, surface_id: str) -> VariableId:
        return self.plane_ids[surface_id]

    def surface_of_plane(self, vid: VariableId) -> str:
        for sid, pid in self.plane_ids.items():
            if pid == vid:
                return sid
        raise PlanError(f"no surface for plane variable {vid}")

    def room_of_variable(self, vid: VariableId) -> str:
        for rid, rv in self.room_ids.items():
            if rv == vid:
                return rid
        raise PlanError(f"no room for variable {vid}")


def build_a_graph(plan: FloorPlan) -> AGraph:
    """Construct the plan's factor graph with all variables at their analytic values."""
    validate_plan(plan)
    surfaces = wall_surfaces(plan)
    graph = FactorGraph()

    plane_ids: dict[str, VariableId] = {}
    for wall in plan.walls:
        for tag in ("+", "-"):
            sid = f"{wall.id}:{tag}"
            surf = surfaces[sid]
            plane_ids[sid] = graph.add_variable(
                VarKind.PLANE, [surf.plane.phi, surf.plane.dist]
            )

    wall_ids: dict[str, VariableId] = {}
    for wall in plan.walls:
        plus = surfaces[f"{wall.id}:+"]
        minus = surfaces[f"{wall.id}:-"]
        center = compute_wall_center(plus.plane, minus.plane, wall.start)
        wid = graph.add_variable(VarKind.WALL, center)
        wall_ids[wall.id] = wid
        graph.add_factor(
            Factor(
                FactorKind.WALL_CENTER,
                (wid, plane_ids[plus.id], plane_ids[minus.id]),
                np.asarray(wall.start, float),
            )
        )

    room_ids: dict[str, VariableId] = {}
    for room in plan.rooms:
        x0, x1, y0, y1 = plan.room_rect(room.id)
        center = np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])
        rid = graph.add_variable(VarKind.ROOM, center)
        room_ids[room.id] = rid
        graph.add_factor(
            Factor(
                FactorKind.ROOM_TO_WALLS,
                (
                    rid,
                    plane_ids[room.surfaces["px"]],
                    plane_ids[room.surfaces["mx"]],
                    plane_ids[room.surfaces["py"]],
                    plane_ids[room.surfaces["my"]],
                ),
            )
        )

    if plan.rooms:
        first = room_ids[plan.rooms[0].id]
        graph.add_factor(Factor(FactorKind.PRIOR, (first,), graph.value(first)))

    doorway_ids: dict[str, VariableId] = {}
    for doorway in plan.doorways:
        pos = np.asarray(doorway.position, float)
        did = graph.add_variable(VarKind.DOORWAY, pos)
        doorway_ids[doorway.id] = did
        r1, r2 = doorway.rooms
        offsets = (pos - graph.value(room_ids[r1]), pos - graph.value(room_ids[r2]))
        graph.add_factor(
            Factor(
                FactorKind.DOORWAY_TO_ROOMS,
                (did, room_ids[r1], room_ids[r2]),
                offsets,
            )
        )

    cost = graph.total_cost()
    if cost > 1e-12:
        raise PlanError(f"plan is internally inconsistent: initial graph cost {cost:.3e}")
    return AGraph(plan, graph, plane_ids, wall_ids, room_ids, doorway_ids, surfaces)
