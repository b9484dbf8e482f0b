"""Hierarchical matching between a plan graph and an online robot graph.

Top-down, room-level correspondence candidates are proposed by geometric
affinity (room dimensions, pairwise center distances), expanded downward to
their wall surfaces, re-combined bottom-up into all-level candidates, scored
globally under a closed-form alignment, and finally clustered to expose
symmetric (ambiguous) solutions.

All stages are pure functions of two read-only graph snapshots, so a match
can run concurrently with graph updates on a copy.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .factor_graph import FactorGraph, FactorKind, VariableId, VarKind
from .geometry import (
    FrameTransform,
    GeometryError,
    axis_of_normal,
    estimate_transform_closed_form,
    wrap_angle,
)


class MatchError(ValueError):
    """Structural problem in the matching inputs."""


class RoomStructureError(MatchError):
    """A room is not connected to the expected number of wall surfaces."""


class WallPairingError(MatchError):
    """A room pair's wall surfaces cannot be put in one-to-one correspondence."""


class MatchStatus(Enum):
    MATCHED = "matched"
    AMBIGUOUS = "ambiguous"
    NO_MATCH = "no_match"


@dataclass(frozen=True)
class MatcherConfig:
    dim_tol: float = 0.3  # per-axis room dimension gate [m]
    dist_tol: float = 0.5  # pairwise center-distance consistency [m]
    room_affinity_min: float = 0.5  # drop room-level candidates below this
    accept_affinity: float = 0.6  # best candidate must reach this to match
    cluster_rel_width: float = 0.10  # relative width of the winning cluster
    rho_scale: float = 0.25  # [m], room-center residual scale in the affinity
    pi_scale: float = 0.1  # mixed rad/m wall residual scale in the affinity
    exhaustive_max_rooms: int = 8  # enumerate exhaustively up to this many S-rooms
    beam_width: int = 50


@dataclass(frozen=True)
class PlaneEntry:
    vid: VariableId
    phi: float
    d: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.phi), math.sin(self.phi)])

    @property
    def foot(self) -> np.ndarray:
        return self.d * self.normal


@dataclass(frozen=True)
class RoomEntry:
    vid: VariableId
    center: tuple[float, float]
    planes: tuple[PlaneEntry, PlaneEntry, PlaneEntry, PlaneEntry]

    @property
    def dims(self) -> tuple[float, float]:
        """Sorted (small, large) gap of the two opposed plane pairs."""
        return tuple(sorted((_pair_gap(self.planes[0], self.planes[1]),
                             _pair_gap(self.planes[2], self.planes[3]))))


def _pair_gap(a: PlaneEntry, b: PlaneEntry) -> float:
    n = a.normal
    return abs(float((a.foot - b.foot) @ n))


def room_entries(graph: FactorGraph) -> list[RoomEntry]:
    """Four-wall room views (center, plane pairs) read off a graph snapshot."""
    entries = []
    for _, factor in graph.factors_of(FactorKind.ROOM_TO_WALLS):
        if factor.variables[0].kind != VarKind.ROOM or len(factor.variables) != 5:
            continue
        room = factor.variables[0]
        planes = []
        for vid in factor.variables[1:]:
            phi, d = graph.value(vid)
            planes.append(PlaneEntry(vid, float(phi), float(d)))
        cx, cy = graph.value(room)
        entries.append(RoomEntry(room, (float(cx), float(cy)), tuple(planes)))
    return entries


@dataclass(frozen=True)
class MatchPair:
    a_node: VariableId
    s_node: VariableId
    level: str  # "room" | "wall_surface"

    def key(self):
        return (self.level, self.a_node.kind.value, self.a_node.index,
                self.s_node.kind.value, self.s_node.index)


@dataclass
class MatchCandidate:
    pairs: tuple[MatchPair, ...]
    affinity: float
    transform_hint: FrameTransform

    @property
    def room_pairs(self) -> tuple[MatchPair, ...]:
        return tuple(p for p in self.pairs if p.level == "room")

    @property
    def wall_pairs(self) -> tuple[MatchPair, ...]:
        return tuple(p for p in self.pairs if p.level == "wall_surface")

    def sort_key(self):
        return (-self.affinity, tuple(p.key() for p in self.pairs))


@dataclass
class MatchResult:
    status: MatchStatus
    best: MatchCandidate | None
    cluster: list[MatchCandidate] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        def cand(c: MatchCandidate) -> dict:
            return {
                "affinity": c.affinity,
                "transform_hint": c.transform_hint.pose.as_array().tolist(),
                "pairs": [
                    {
                        "level": p.level,
                        "a": p.a_node.key(),
                        "s": p.s_node.key(),
                    }
                    for p in c.pairs
                ],
            }

        return {
            "status": self.status.value,
            "best": None if self.best is None else cand(self.best),
            "cluster": [cand(c) for c in self.cluster],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=indent)


def _dims_compatible(a: RoomEntry, s: RoomEntry, cfg: MatcherConfig) -> bool:
    da, ds = a.dims, s.dims
    return abs(da[0] - ds[0]) <= cfg.dim_tol and abs(da[1] - ds[1]) <= cfg.dim_tol


def _distance_consistent(
    assignment: list[tuple[RoomEntry, RoomEntry]], cfg: MatcherConfig
) -> bool:
    for (a1, s1), (a2, s2) in itertools.combinations(assignment, 2):
        da = math.dist(a1.center, a2.center)
        ds = math.dist(s1.center, s2.center)
        if abs(da - ds) > cfg.dist_tol:
            return False
    return True


def _room_level_candidate(
    assignment: list[tuple[RoomEntry, RoomEntry]], cfg: MatcherConfig
) -> MatchCandidate | None:
    pairs_pts = [(s.center, a.center) for a, s in assignment]
    try:
        hint = estimate_transform_closed_form(pairs_pts)
    except GeometryError:
        return None
    residuals = [
        float(np.linalg.norm(hint.transform_point(s.center) - np.asarray(a.center)))
        for a, s in assignment
    ]
    e_rho = math.sqrt(sum(r * r for r in residuals) / len(residuals))
    affinity = math.exp(-e_rho / cfg.rho_scale)
    pairs = tuple(
        MatchPair(a.vid, s.vid, "room")
        for a, s in sorted(assignment, key=lambda t: t[1].vid.index)
    )
    return MatchCandidate(pairs, affinity, hint)


def propose_room_pairs(
    a_rooms: list[RoomEntry], s_rooms: list[RoomEntry], cfg: MatcherConfig | None = None
) -> list[MatchCandidate]:
    """Room-level candidates: injective S->A assignments passing the geometric gates.

    Exhaustive (with pairwise-distance pruning) up to ``exhaustive_max_rooms``
    observed rooms, beam search beyond. Candidates below the room-level
    affinity floor are dropped; output is sorted best first.
    """
    cfg = cfg or MatcherConfig()
    if len(s_rooms) < 2 or not a_rooms:
        return []
    s_rooms = sorted(s_rooms, key=lambda r: r.vid.index)
    compat = {
        s.vid: [a for a in a_rooms if _dims_compatible(a, s, cfg)] for s in s_rooms
    }
    assignments: list[list[tuple[RoomEntry, RoomEntry]]] = []
    if len(s_rooms) <= cfg.exhaustive_max_rooms:
        def extend(k: int, partial: list[tuple[RoomEntry, RoomEntry]], used: set):
            if k == len(s_rooms):
                assignments.append(list(partial))
                return
            s = s_rooms[k]
            for a in compat[s.vid]:
                if a.vid in used:
                    continue
                ok = all(
                    abs(math.dist(pa.center, a.center) - math.dist(ps.center, s.center))
                    <= cfg.dist_tol
                    for pa, ps in partial
                )
                if not ok:
                    continue
                partial.append((a, s))
                used.add(a.vid)
                extend(k + 1, partial, used)
                partial.pop()
                used.discard(a.vid)

        extend(0, [], set())
    else:
        beams: list[list[tuple[RoomEntry, RoomEntry]]] = [[]]
        for s in s_rooms:
            grown: list[list[tuple[RoomEntry, RoomEntry]]] = []
            for partial in beams:
                used = {a.vid for a, _ in partial}
                for a in compat[s.vid]:
                    if a.vid in used:
                        continue
                    ok = all(
                        abs(
                            math.dist(pa.center, a.center)
                            - math.dist(ps.center, s.center)
                        )
                        <= cfg.dist_tol
                        for pa, ps in partial
                    )
                    if ok:
                        grown.append(partial + [(a, s)])
            grown.sort(
                key=lambda asg: sum(math.dist(a.dims, s.dims) for a, s in asg)
            )
            beams = grown[: cfg.beam_width]
        assignments = beams

    candidates = []
    for assignment in assignments:
        cand = _room_level_candidate(assignment, cfg)
        if cand is not None and cand.affinity >= cfg.room_affinity_min:
            candidates.append(cand)
    candidates.sort(key=MatchCandidate.sort_key)
    return candidates


def _side_roles(
    room: RoomEntry, to_plan: FrameTransform | None
) -> dict[tuple[str, int], PlaneEntry]:
    """Map each of the room's four planes to a (axis, side-sign) role.

    Roles are evaluated in the plan frame: the optional transform maps the
    room's geometry there first, which keeps the pairing meaningful under an
    arbitrary map-to-plan rotation.
    """
    if len(room.planes) != 4:
        raise RoomStructureError(f"room {room.vid} has {len(room.planes)} planes, need 4")
    if to_plan is None:
        rot = np.eye(2)
        center = np.asarray(room.center)
    else:
        rot = to_plan.pose.rotation()
        center = to_plan.transform_point(room.center)
    roles: dict[tuple[str, int], PlaneEntry] = {}
    for plane in room.planes:
        n = rot @ plane.normal
        foot = rot @ plane.foot + (
            np.zeros(2) if to_plan is None else to_plan.pose.translation
        )
        axis = axis_of_normal(n[0], n[1])
        comp = 0 if axis.value == "x" else 1
        side = 1 if foot[comp] - center[comp] >= 0 else -1
        role = (axis.value, side)
        if role in roles:
            raise WallPairingError(
                f"room {room.vid}: two planes land on the same side role {role}"
            )
        roles[role] = plane
    if len(roles) != 4:
        raise WallPairingError(f"room {room.vid}: could not assign four distinct side roles")
    return roles


def propose_wall_pairs(
    room_pair: MatchPair,
    a_rooms_by_vid: dict[VariableId, RoomEntry],
    s_rooms_by_vid: dict[VariableId, RoomEntry],
    hint: FrameTransform | None = None,
) -> list[MatchPair]:
    """Match a room pair's four wall surfaces by side role; exactly 4 or raise."""
    a_room = a_rooms_by_vid[room_pair.a_node]
    s_room = s_rooms_by_vid[room_pair.s_node]
    a_roles = _side_roles(a_room, None)
    s_roles = _side_roles(s_room, hint)
    if set(a_roles) != set(s_roles):
        raise WallPairingError(
            f"rooms {a_room.vid} / {s_room.vid}: side roles do not line up"
        )
    return [
        MatchPair(a_roles[role].vid, s_roles[role].vid, "wall_surface")
        for role in sorted(a_roles)
    ]


def combine_bottom_up(
    expanded: list[tuple[MatchCandidate, list[MatchPair]]]
) -> list[MatchCandidate]:
    """Merge room candidates with their wall pairs into all-level candidates.

    Candidates whose wall-pair union is not injective in both directions
    (a shared surface mapped to two different counterparts) are discarded.
    """
    out = []
    for cand, wall_pairs in expanded:
        a_map: dict[VariableId, VariableId] = {}
        s_map: dict[VariableId, VariableId] = {}
        unique: dict[tuple, MatchPair] = {}
        ok = True
        for pair in wall_pairs:
            if a_map.get(pair.a_node, pair.s_node) != pair.s_node:
                ok = False
                break
            if s_map.get(pair.s_node, pair.a_node) != pair.a_node:
                ok = False
                break
            a_map[pair.a_node] = pair.s_node
            s_map[pair.s_node] = pair.a_node
            unique.setdefault(pair.key(), pair)
        if not ok:
            continue
        pairs = cand.room_pairs + tuple(
            unique[k] for k in sorted(unique)
        )
        out.append(MatchCandidate(pairs, cand.affinity, cand.transform_hint))
    return out


def score_candidate(
    cand: MatchCandidate,
    a_rooms_by_vid: dict[VariableId, RoomEntry],
    s_rooms_by_vid: dict[VariableId, RoomEntry],
    cfg: MatcherConfig | None = None,
) -> MatchCandidate | None:
    """Global affinity of an all-level candidate under its re-estimated alignment.

    Returns None when the alignment is degenerate (candidate unusable).
    """
    cfg = cfg or MatcherConfig()
    room_pairs = cand.room_pairs
    if len(room_pairs) < 2:
        raise MatchError("scoring needs at least 2 room pairs")
    pts = [
        (s_rooms_by_vid[p.s_node].center, a_rooms_by_vid[p.a_node].center)
        for p in room_pairs
    ]
    try:
        hint = estimate_transform_closed_form(pts)
    except GeometryError:
        return None
    rho_sq = [
        float(
            np.sum(
                (
                    hint.transform_point(s_rooms_by_vid[p.s_node].center)
                    - np.asarray(a_rooms_by_vid[p.a_node].center)
                )
                ** 2
            )
        )
        for p in room_pairs
    ]
    e_rho = math.sqrt(sum(rho_sq) / len(rho_sq))

    a_planes = {
        pl.vid: pl for room in a_rooms_by_vid.values() for pl in room.planes
    }
    s_planes = {
        pl.vid: pl for room in s_rooms_by_vid.values() for pl in room.planes
    }
    comp_sq: list[float] = []
    for pair in cand.wall_pairs:
        ap = a_planes[pair.a_node]
        sp = s_planes[pair.s_node]
        phi_t = wrap_angle(sp.phi + hint.pose.theta)
        d_t = sp.d + math.cos(phi_t) * hint.pose.x + math.sin(phi_t) * hint.pose.y
        dphi = wrap_angle(phi_t - ap.phi)
        if abs(dphi) > math.pi / 2:
            dphi = wrap_angle(dphi - math.pi)
            d_t = -d_t
        comp_sq.append(dphi**2)
        comp_sq.append((d_t - ap.d) ** 2)
    e_pi = math.sqrt(sum(comp_sq) / len(comp_sq)) if comp_sq else 0.0
    affinity = math.exp(-(e_rho / cfg.rho_scale + e_pi / cfg.pi_scale))
    return MatchCandidate(cand.pairs, affinity, hint)


def cluster_and_decide(
    scored: list[MatchCandidate], cfg: MatcherConfig | None = None
) -> MatchResult:
    """1-D affinity clustering: unique winner, symmetric cluster, or no match."""
    cfg = cfg or MatcherConfig()
    ranked = sorted(scored, key=MatchCandidate.sort_key)
    if not ranked or ranked[0].affinity < cfg.accept_affinity:
        return MatchResult(MatchStatus.NO_MATCH, None, [])
    top = ranked[0].affinity
    cluster = [c for c in ranked if c.affinity >= top * (1.0 - cfg.cluster_rel_width)]
    if len(cluster) == 1:
        return MatchResult(MatchStatus.MATCHED, cluster[0], cluster)
    return MatchResult(MatchStatus.AMBIGUOUS, cluster[0], cluster)


def match(
    a_graph: FactorGraph, s_graph: FactorGraph, cfg: MatcherConfig | None = None
) -> MatchResult:
    """Full pipeline: propose -> expand -> combine -> score -> cluster."""
    cfg = cfg or MatcherConfig()
    a_rooms = room_entries(a_graph)
    s_rooms = room_entries(s_graph)
    return match_entries(a_rooms, s_rooms, cfg)


def match_entries(
    a_rooms: list[RoomEntry], s_rooms: list[RoomEntry], cfg: MatcherConfig | None = None
) -> MatchResult:
    cfg = cfg or MatcherConfig()
    if len(s_rooms) < 2:
        return MatchResult(MatchStatus.NO_MATCH, None, [])
    a_by_vid = {r.vid: r for r in a_rooms}
    s_by_vid = {r.vid: r for r in s_rooms}
    room_cands = propose_room_pairs(a_rooms, s_rooms, cfg)
    expanded: list[tuple[MatchCandidate, list[MatchPair]]] = []
    for cand in room_cands:
        wall_pairs: list[MatchPair] = []
        try:
            for pair in cand.room_pairs:
                wall_pairs.extend(
                    propose_wall_pairs(pair, a_by_vid, s_by_vid, cand.transform_hint)
                )
        except WallPairingError:
            continue
        expanded.append((cand, wall_pairs))
    combined = combine_bottom_up(expanded)
    scored = []
    for cand in combined:
        rescored = score_candidate(cand, a_by_vid, s_by_vid, cfg)
        if rescored is not None:
            scored.append(rescored)
    return cluster_and_decide(scored, cfg)
