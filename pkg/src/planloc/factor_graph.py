"""Sparse nonlinear least-squares over typed variables and factors.

Every graph layer in the system (plan graph, online robot graph, merged
graph) is an instance of the same engine: typed variables holding small
dense state blocks, factors contributing weighted residuals, and a
Levenberg-Marquardt loop over the free variables.

Variable parameterizations:

=============  ====  =======================================
kind           dim   meaning
=============  ====  =======================================
keyframe       3     robot pose (x, y, theta)
plane          2     wall surface (phi, d); d may be signed
wall           2     wall center point
room           2     four-wall room center
two_wall_room  2     two-wall room center
doorway        2     doorway position
floor          2     floor center
transform      3     map->plan alignment (x, y, theta)
=============  ====  =======================================
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, NamedTuple

import numpy as np

from .geometry import PERP, Pose2, rotation2, wrap_angle


class GraphError(ValueError):
    """Malformed graph input: bad dimensions, unknown variables, bad payloads."""


class GaugeFreedomError(GraphError):
    """The graph has no prior factor and no fixed variable, so the optimum is not unique."""


class VarKind(Enum):
    KEYFRAME = "keyframe"
    PLANE = "plane"
    WALL = "wall"
    ROOM = "room"
    TWO_WALL_ROOM = "two_wall_room"
    DOORWAY = "doorway"
    FLOOR = "floor"
    TRANSFORM = "transform"


VAR_DIM = {
    VarKind.KEYFRAME: 3,
    VarKind.PLANE: 2,
    VarKind.WALL: 2,
    VarKind.ROOM: 2,
    VarKind.TWO_WALL_ROOM: 2,
    VarKind.DOORWAY: 2,
    VarKind.FLOOR: 2,
    VarKind.TRANSFORM: 3,
}

# Slots that hold angles and must be re-wrapped after additive updates.
ANGLE_SLOTS = {
    VarKind.KEYFRAME: (2,),
    VarKind.TRANSFORM: (2,),
    VarKind.PLANE: (0,),
}

POINT_KINDS = (VarKind.ROOM, VarKind.TWO_WALL_ROOM, VarKind.FLOOR, VarKind.WALL, VarKind.DOORWAY)


class VariableId(NamedTuple):
    kind: VarKind
    index: int

    def key(self) -> list:
        return [self.kind.value, self.index]


class FactorKind(Enum):
    ODOMETRY = "odometry"
    POSE_PLANE = "pose_plane"
    ROOM_TO_WALLS = "room_to_walls"
    WALL_CENTER = "wall_center"
    DOORWAY_TO_ROOMS = "doorway_to_rooms"
    ROOM_TO_ROOM = "room_to_room"
    PLANE_TO_PLANE = "plane_to_plane"
    PRIOR = "prior"


# Diagonal information defaults, overridable per factor.
DEFAULT_INFORMATION = {
    FactorKind.ODOMETRY: (100.0, 100.0, 400.0),
    FactorKind.POSE_PLANE: (400.0, 2500.0),
    FactorKind.ROOM_TO_WALLS: (25.0, 25.0),
    FactorKind.WALL_CENTER: (25.0, 25.0),
    FactorKind.DOORWAY_TO_ROOMS: (25.0, 25.0),
    FactorKind.ROOM_TO_ROOM: (100.0, 100.0),
    FactorKind.PLANE_TO_PLANE: (100.0, 100.0),
}

PRIOR_INFORMATION_SCALE = 1e6


def _as_info(kind: FactorKind, information, dim: int) -> np.ndarray:
    if information is None:
        diag = DEFAULT_INFORMATION.get(kind)
        if diag is None:
            diag = (PRIOR_INFORMATION_SCALE,) * dim
        return np.diag(diag).astype(float)
    info = np.asarray(information, dtype=float)
    if info.shape != (dim, dim):
        raise GraphError(f"information for {kind.value} must be {dim}x{dim}, got {info.shape}")
    if not np.allclose(info, info.T, atol=1e-12):
        raise GraphError("information matrix must be symmetric")
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError as exc:
        raise GraphError("information matrix must be positive definite") from exc
    return info


@dataclass
class Factor:
    """A residual term: kind, ordered variables, measurement payload, information."""

    kind: FactorKind
    variables: tuple[VariableId, ...]
    measurement: Any = None
    information: np.ndarray | None = None

    def __post_init__(self):
        self.variables = tuple(self.variables)
        spec = _FACTOR_SPECS[self.kind]
        spec.validate(self)
        self.information = _as_info(self.kind, self.information, spec.residual_dim(self))


@dataclass
class SolverConfig:
    max_iterations: int = 100
    initial_lambda: float = 1e-4
    lambda_up: float = 10.0
    lambda_down: float = 0.5
    rel_tol: float = 1e-9
    abs_tol: float = 1e-10

    def __post_init__(self):
        if min(self.max_iterations, self.initial_lambda, self.rel_tol, self.abs_tol) <= 0:
            raise GraphError("solver config values must be positive")
        if not (self.lambda_up > 1.0 > self.lambda_down > 0.0):
            raise GraphError("need lambda_up > 1 > lambda_down > 0")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    initial_cost: float
    final_cost: float
    chi2_per_factor: dict[int, float] = field(default_factory=dict)
    cost_trace: list[float] = field(default_factory=list)
    message: str = ""


# ---------------------------------------------------------------------------
# residuals and analytic Jacobians
# ---------------------------------------------------------------------------
#
# Each implementation returns (residual, [jacobian per variable]) evaluated at
# the given variable values. Angular residual components are wrapped into
# (-pi, pi].


def _odometry(factor: Factor, vals: list[np.ndarray]):
    x1, y1, t1 = vals[0]
    x2, y2, t2 = vals[1]
    z = factor.measurement  # Pose2: measured relative pose
    a = rotation2(t1 - t2)
    b = rotation2(-t2)
    q = np.array([x2 - x1, y2 - y1])
    zt = z.translation
    et = a @ zt - b @ q
    etheta = wrap_angle(z.theta - (t2 - t1))
    r = np.array([et[0], et[1], etheta])

    saz = PERP @ (a @ zt)
    sbq = PERP @ (b @ q)
    j1 = np.zeros((3, 3))
    j1[:2, :2] = b
    j1[:2, 2] = saz
    j1[2, 2] = 1.0
    j2 = np.zeros((3, 3))
    j2[:2, :2] = -b
    j2[:2, 2] = -saz + sbq
    j2[2, 2] = -1.0
    return r, [j1, j2]


def _pose_plane(factor: Factor, vals: list[np.ndarray]):
    x, y, t = vals[0]
    phi, d = vals[1]
    phi_z, d_z = factor.measurement
    c, s = math.cos(phi), math.sin(phi)
    phi_b = phi - t
    d_b = d - (x * c + y * s)
    # The prediction and the measurement describe the same geometric plane up
    # to an orientation flip; compare in whichever polarity agrees in angle.
    flip = abs(wrap_angle(phi_b - phi_z)) > math.pi / 2
    sign = -1.0 if flip else 1.0
    if flip:
        phi_b = phi_b + math.pi
        d_b = -d_b
    r = np.array([wrap_angle(phi_b - phi_z), d_b - d_z])

    jk = np.zeros((2, 3))
    jk[0, 2] = -1.0
    jk[1, 0] = -sign * c
    jk[1, 1] = -sign * s
    jp = np.zeros((2, 2))
    jp[0, 0] = 1.0
    jp[1, 0] = sign * (x * s - y * c)
    jp[1, 1] = sign
    return r, [jk, jp]


def _plane_midpoint(planes: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Midpoint of the planes' perpendicular feet, with per-plane Jacobians."""
    k = len(planes)
    mid = np.zeros(2)
    jacs = []
    for phi, d in planes:
        n = np.array([math.cos(phi), math.sin(phi)])
        mid += (d / k) * n
        j = np.zeros((2, 2))
        j[:, 0] = (d / k) * (PERP @ n)
        j[:, 1] = n / k
        jacs.append(j)
    return mid, jacs


def _room_to_walls(factor: Factor, vals: list[np.ndarray]):
    room = vals[0]
    center, jmids = _plane_midpoint(vals[1:])
    # With one opposed pair per axis, the mean of all feet is the pair-wise
    # midpoint sum, i.e. the room center.
    scale = len(vals) - 1
    r = room - center * (scale / 2.0)
    jr = np.eye(2)
    jps = [-(scale / 2.0) * j for j in jmids]
    return r, [jr] + jps


def _wall_center_fn(
    p1: np.ndarray, p2: np.ndarray, s: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Wall center from two surface planes and the wall start point.

    Returns (omega, d_omega/d_p1, d_omega/d_p2) with plane blocks ordered
    (phi, d). The center is the midpoint of the two perpendicular feet,
    corrected along the wall direction by the projection of the start point.
    """
    phi1, d1 = p1
    phi2, d2 = p2
    n1 = np.array([math.cos(phi1), math.sin(phi1)])
    n2 = np.array([math.cos(phi2), math.sin(phi2)])
    w = 0.5 * (d1 * n1 + d2 * n2)
    nw = float(np.linalg.norm(w))
    degenerate = nw < 1e-9
    what = n1 if degenerate else w / nw
    omega = w + s - (s @ what) * what

    # d omega / d what and d what / d w
    m = np.outer(what, s) + (s @ what) * np.eye(2)
    if degenerate:
        df_dw = np.eye(2)
    else:
        p = (np.eye(2) - np.outer(what, what)) / nw
        df_dw = np.eye(2) - m @ p

    dw_dp1 = np.zeros((2, 2))
    dw_dp1[:, 0] = 0.5 * d1 * (PERP @ n1)
    dw_dp1[:, 1] = 0.5 * n1
    dw_dp2 = np.zeros((2, 2))
    dw_dp2[:, 0] = 0.5 * d2 * (PERP @ n2)
    dw_dp2[:, 1] = 0.5 * n2

    j1 = df_dw @ dw_dp1
    j2 = df_dw @ dw_dp2
    if degenerate:
        # what = n1 depends on phi1 directly in this branch.
        j1[:, 0] += -m @ (PERP @ n1)
    return omega, j1, j2, what


def _wall_center(factor: Factor, vals: list[np.ndarray]):
    wall = vals[0]
    s = np.asarray(factor.measurement, dtype=float)
    omega, j1, j2, _ = _wall_center_fn(vals[1], vals[2], s)
    r = wall - omega
    return r, [np.eye(2), -j1, -j2]


def _doorway_to_rooms(factor: Factor, vals: list[np.ndarray]):
    o1, o2 = factor.measurement
    r = (vals[1] + np.asarray(o1)) - (vals[2] + np.asarray(o2))
    return r, [np.zeros((2, 2)), np.eye(2), -np.eye(2)]


def _room_to_room(factor: Factor, vals: list[np.ndarray]):
    offset = np.zeros(2) if factor.measurement is None else np.asarray(factor.measurement, float)
    target = vals[0]
    source = vals[1]
    if len(vals) == 3:
        tx, ty, tth = vals[2]
        rot = rotation2(tth)
        mapped = rot @ source + np.array([tx, ty])
        r = mapped - target - offset
        jt = np.zeros((2, 3))
        jt[:, :2] = np.eye(2)
        jt[:, 2] = PERP @ (rot @ source)
        return r, [-np.eye(2), rot, jt]
    r = source - target - offset
    return r, [-np.eye(2), np.eye(2)]


def _plane_to_plane(factor: Factor, vals: list[np.ndarray]):
    phi_b, d_b = vals[0]
    phi_m, d_m = vals[1]
    has_t = len(vals) == 3
    if has_t:
        tx, ty, tth = vals[2]
    else:
        tx = ty = tth = 0.0
    phi_p = phi_m + tth
    cp, sp = math.cos(phi_p), math.sin(phi_p)
    d_p = d_m + cp * tx + sp * ty
    dperp = -sp * tx + cp * ty  # d d_p / d phi_p
    flip = abs(wrap_angle(phi_p - phi_b)) > math.pi / 2
    sign = -1.0 if flip else 1.0
    if flip:
        phi_p = phi_p + math.pi
        d_p = -d_p
    r = np.array([wrap_angle(phi_p - phi_b), d_p - d_b])

    jb = np.array([[-1.0, 0.0], [0.0, -1.0]])
    jm = np.zeros((2, 2))
    jm[0, 0] = 1.0
    jm[1, 0] = sign * dperp
    jm[1, 1] = sign
    jacs = [jb, jm]
    if has_t:
        jt = np.zeros((2, 3))
        jt[0, 2] = 1.0
        jt[1, 0] = sign * cp
        jt[1, 1] = sign * sp
        jt[1, 2] = sign * dperp
        jacs.append(jt)
    return r, jacs


def _prior(factor: Factor, vals: list[np.ndarray]):
    v = vals[0]
    meas = np.asarray(factor.measurement, dtype=float)
    r = v - meas
    kind = factor.variables[0].kind
    for slot in ANGLE_SLOTS.get(kind, ()):
        r[slot] = wrap_angle(r[slot])
    return r, [np.eye(len(v))]


# Angle rows of each residual, needed when differencing residuals numerically.
RESIDUAL_ANGLE_ROWS: dict[FactorKind, tuple[int, ...]] = {
    FactorKind.ODOMETRY: (2,),
    FactorKind.POSE_PLANE: (0,),
    FactorKind.PLANE_TO_PLANE: (0,),
}


@dataclass(frozen=True)
class _FactorSpec:
    arity_check: Callable[[Factor], bool]
    arity_doc: str
    dim: Callable[[Factor], int]
    impl: Callable[[Factor, list[np.ndarray]], tuple[np.ndarray, list[np.ndarray]]]

    def validate(self, factor: Factor) -> None:
        if not self.arity_check(factor):
            raise GraphError(
                f"{factor.kind.value} factor requires {self.arity_doc}, got "
                f"{[v.kind.value for v in factor.variables]}"
            )

    def residual_dim(self, factor: Factor) -> int:
        return self.dim(factor)


def _kinds(factor: Factor) -> list[VarKind]:
    return [v.kind for v in factor.variables]


_FACTOR_SPECS: dict[FactorKind, _FactorSpec] = {
    FactorKind.ODOMETRY: _FactorSpec(
        lambda f: _kinds(f) == [VarKind.KEYFRAME, VarKind.KEYFRAME]
        and isinstance(f.measurement, Pose2),
        "two keyframes and a Pose2 measurement",
        lambda f: 3,
        _odometry,
    ),
    FactorKind.POSE_PLANE: _FactorSpec(
        lambda f: _kinds(f) == [VarKind.KEYFRAME, VarKind.PLANE] and f.measurement is not None,
        "a keyframe, a plane and a (phi, d) measurement",
        lambda f: 2,
        _pose_plane,
    ),
    FactorKind.ROOM_TO_WALLS: _FactorSpec(
        lambda f: (
            _kinds(f) == [VarKind.ROOM] + [VarKind.PLANE] * 4
            or _kinds(f) == [VarKind.TWO_WALL_ROOM] + [VarKind.PLANE] * 2
        ),
        "a room plus 4 planes, or a two-wall room plus 2 planes",
        lambda f: 2,
        _room_to_walls,
    ),
    FactorKind.WALL_CENTER: _FactorSpec(
        lambda f: _kinds(f) == [VarKind.WALL, VarKind.PLANE, VarKind.PLANE]
        and f.measurement is not None,
        "a wall, two planes and the wall start point",
        lambda f: 2,
        _wall_center,
    ),
    FactorKind.DOORWAY_TO_ROOMS: _FactorSpec(
        lambda f: _kinds(f) == [VarKind.DOORWAY, VarKind.ROOM, VarKind.ROOM]
        and f.measurement is not None
        and len(f.measurement) == 2,
        "a doorway, two rooms and their two room-relative offsets",
        lambda f: 2,
        _doorway_to_rooms,
    ),
    FactorKind.ROOM_TO_ROOM: _FactorSpec(
        lambda f: (
            len(f.variables) in (2, 3)
            and all(v.kind in POINT_KINDS for v in f.variables[:2])
            and (len(f.variables) == 2 or f.variables[2].kind == VarKind.TRANSFORM)
        ),
        "two point variables plus an optional transform",
        lambda f: 2,
        _room_to_room,
    ),
    FactorKind.PLANE_TO_PLANE: _FactorSpec(
        lambda f: (
            len(f.variables) in (2, 3)
            and _kinds(f)[:2] == [VarKind.PLANE, VarKind.PLANE]
            and (len(f.variables) == 2 or f.variables[2].kind == VarKind.TRANSFORM)
        ),
        "two planes plus an optional transform",
        lambda f: 2,
        _plane_to_plane,
    ),
    FactorKind.PRIOR: _FactorSpec(
        lambda f: len(f.variables) == 1
        and f.measurement is not None
        and len(np.atleast_1d(f.measurement)) == VAR_DIM[f.variables[0].kind],
        "one variable and a full-dimension measurement",
        lambda f: VAR_DIM[f.variables[0].kind],
        _prior,
    ),
}


class FactorGraph:
    """Typed variables plus residual factors, solvable by Levenberg-Marquardt."""

    def __init__(self):
        self._values: dict[VariableId, np.ndarray] = {}
        self._fixed: set[VariableId] = set()
        self._order: list[VariableId] = []
        self._counters: dict[VarKind, int] = {}
        self._factors: dict[int, Factor] = {}
        self._next_factor_id = 0

    # -- variables ---------------------------------------------------------

    def add_variable(self, kind: VarKind, value, *, fixed: bool = False) -> VariableId:
        value = np.asarray(value, dtype=float).copy()
        if value.shape != (VAR_DIM[kind],):
            raise GraphError(
                f"{kind.value} variable needs dimension {VAR_DIM[kind]}, got shape {value.shape}"
            )
        index = self._counters.get(kind, 0)
        self._counters[kind] = index + 1
        vid = VariableId(kind, index)
        self._values[vid] = value
        self._order.append(vid)
        if fixed:
            self._fixed.add(vid)
        return vid

    def value(self, vid: VariableId) -> np.ndarray:
        try:
            return self._values[vid].copy()
        except KeyError:
            raise GraphError(f"unknown variable {vid}") from None

    def set_value(self, vid: VariableId, value) -> None:
        value = np.asarray(value, dtype=float).copy()
        if vid not in self._values:
            raise GraphError(f"unknown variable {vid}")
        if value.shape != self._values[vid].shape:
            raise GraphError(f"value shape mismatch for {vid}")
        self._values[vid] = value

    def fix(self, vid: VariableId, fixed: bool = True) -> None:
        if vid not in self._values:
            raise GraphError(f"unknown variable {vid}")
        if fixed:
            self._fixed.add(vid)
        else:
            self._fixed.discard(vid)

    def is_fixed(self, vid: VariableId) -> bool:
        return vid in self._fixed

    def variables(self) -> list[VariableId]:
        return list(self._order)

    def variables_of(self, kind: VarKind) -> list[VariableId]:
        return [v for v in self._order if v.kind == kind]

    def remove_variable(self, vid: VariableId) -> None:
        if any(vid in f.variables for f in self._factors.values()):
            raise GraphError(f"variable {vid} still referenced by factors")
        self._values.pop(vid, None)
        self._fixed.discard(vid)
        self._order.remove(vid)

    # -- factors -----------------------------------------------------------

    def add_factor(self, factor: Factor) -> int:
        for vid in factor.variables:
            if vid not in self._values:
                raise GraphError(f"factor references unknown variable {vid}")
        fid = self._next_factor_id
        self._next_factor_id += 1
        self._factors[fid] = factor
        return fid

    def factor(self, fid: int) -> Factor:
        try:
            return self._factors[fid]
        except KeyError:
            raise GraphError(f"unknown factor id {fid}") from None

    def factors(self) -> dict[int, Factor]:
        return dict(self._factors)

    def factors_of(self, kind: FactorKind) -> list[tuple[int, Factor]]:
        return [(fid, f) for fid, f in sorted(self._factors.items()) if f.kind == kind]

    def remove_factor(self, fid: int) -> None:
        if fid not in self._factors:
            raise GraphError(f"unknown factor id {fid}")
        del self._factors[fid]

    # -- evaluation --------------------------------------------------------

    def _gather(self, factor: Factor) -> list[np.ndarray]:
        vals = []
        for vid in factor.variables:
            if vid not in self._values:
                raise GraphError(f"factor references unknown variable {vid}")
            vals.append(self._values[vid])
        return vals

    def evaluate_residual(self, factor: Factor) -> np.ndarray:
        r, _ = _FACTOR_SPECS[factor.kind].impl(factor, self._gather(factor))
        return r

    def residual_and_jacobians(self, factor: Factor) -> tuple[np.ndarray, list[np.ndarray]]:
        return _FACTOR_SPECS[factor.kind].impl(factor, self._gather(factor))

    def chi2(self, fid: int) -> float:
        f = self.factor(fid)
        r = self.evaluate_residual(f)
        return float(r @ f.information @ r)

    def total_cost(self) -> float:
        return sum(self.chi2(fid) for fid in self._factors)

    # -- optimization ------------------------------------------------------

    def _free_layout(self) -> tuple[list[VariableId], dict[VariableId, int], int]:
        free = [v for v in self._order if v not in self._fixed]
        offsets = {}
        n = 0
        for v in free:
            offsets[v] = n
            n += VAR_DIM[v.kind]
        return free, offsets, n

    def _linearize(self, offsets: dict[VariableId, int], n: int):
        h = np.zeros((n, n))
        b = np.zeros(n)
        cost = 0.0
        for fid in sorted(self._factors):
            factor = self._factors[fid]
            r, jacs = self.residual_and_jacobians(factor)
            info = factor.information
            cost += float(r @ info @ r)
            wr = info @ r
            entries = []
            for vid, jac in zip(factor.variables, jacs):
                if vid in offsets:
                    entries.append((offsets[vid], VAR_DIM[vid.kind], jac, info @ jac))
            for off_i, dim_i, j_i, _ in entries:
                b[off_i : off_i + dim_i] += j_i.T @ wr
                for off_j, dim_j, _, wj_j in entries:
                    h[off_i : off_i + dim_i, off_j : off_j + dim_j] += j_i.T @ wj_j
        return h, b, cost

    def _apply_step(self, free, offsets, delta) -> dict[VariableId, np.ndarray]:
        backup = {}
        for vid in free:
            off = offsets[vid]
            dim = VAR_DIM[vid.kind]
            backup[vid] = self._values[vid].copy()
            newval = self._values[vid] + delta[off : off + dim]
            for slot in ANGLE_SLOTS.get(vid.kind, ()):
                newval[slot] = wrap_angle(newval[slot])
            self._values[vid] = newval
        return backup

    def optimize(self, config: SolverConfig | None = None) -> SolveReport:
        config = config or SolverConfig()
        if not self._factors:
            raise GraphError("cannot optimize a graph without factors")
        anchored = bool(self._fixed) or any(
            f.kind == FactorKind.PRIOR for f in self._factors.values()
        )
        if not anchored:
            raise GaugeFreedomError(
                "graph has no prior factor and no fixed variable; anchor it first"
            )

        free, offsets, n = self._free_layout()
        initial_cost = self.total_cost()
        trace = [initial_cost]
        if n == 0:
            report = SolveReport(True, 0, initial_cost, initial_cost, {}, trace, "no free variables")
            report.chi2_per_factor = {fid: self.chi2(fid) for fid in sorted(self._factors)}
            return report

        lam = config.initial_lambda
        cost = initial_cost
        converged = False
        message = "max iterations reached"
        iterations = 0
        for iterations in range(1, config.max_iterations + 1):
            h, b, cost = self._linearize(offsets, n)
            if float(np.max(np.abs(b), initial=0.0)) <= config.abs_tol:
                converged = True
                message = "gradient below tolerance"
                iterations -= 1
                break
            stepped = False
            while lam < 1e12:
                try:
                    delta = np.linalg.solve(h + lam * np.eye(n), -b)
                except np.linalg.LinAlgError:
                    lam *= config.lambda_up
                    continue
                backup = self._apply_step(free, offsets, delta)
                new_cost = self.total_cost()
                if new_cost <= cost:
                    lam = max(lam * config.lambda_down, 1e-12)
                    stepped = True
                    break
                self._values.update(backup)
                lam *= config.lambda_up
            if not stepped:
                converged = False
                message = "step search failed: lambda escalation exhausted"
                break
            trace.append(new_cost)
            rel = (cost - new_cost) / max(cost, 1e-300)
            cost = new_cost
            if rel <= config.rel_tol:
                converged = True
                message = "relative cost decrease below tolerance"
                break

        final_cost = self.total_cost()
        report = SolveReport(
            converged=converged,
            iterations=iterations,
            initial_cost=initial_cost,
            final_cost=final_cost,
            cost_trace=trace,
            message=message,
        )
        report.chi2_per_factor = {fid: self.chi2(fid) for fid in sorted(self._factors)}
        return report

    # -- verification ------------------------------------------------------

    def check_jacobians(self, tolerance: float = 1e-5, step: float = 1e-6) -> list[int]:
        """Compare analytic Jacobians against central finite differences.

        Returns the ids of factors whose worst entry disagrees beyond
        ``tolerance`` (relative, clamped to absolute below magnitude 1).
        """
        offenders = []
        for fid in sorted(self._factors):
            factor = self._factors[fid]
            _, jacs = self.residual_and_jacobians(factor)
            angle_rows = RESIDUAL_ANGLE_ROWS.get(factor.kind, ())
            # A variable repeated within one factor contributes the sum of its
            # per-slot blocks to the numeric derivative.
            analytic: dict[VariableId, np.ndarray] = {}
            for vid, jac in zip(factor.variables, jacs):
                analytic[vid] = analytic.get(vid, 0.0) + jac
            worst = 0.0
            for vid, jac in analytic.items():
                base = self._values[vid]
                num = np.zeros_like(jac)
                for col in range(len(base)):
                    saved = base[col]
                    base[col] = saved + step
                    r_plus = self.evaluate_residual(factor)
                    base[col] = saved - step
                    r_minus = self.evaluate_residual(factor)
                    base[col] = saved
                    diff = r_plus - r_minus
                    for row in angle_rows:
                        diff[row] = wrap_angle(diff[row])
                    num[:, col] = diff / (2.0 * step)
                denom = np.maximum(1.0, np.maximum(np.abs(jac), np.abs(num)))
                worst = max(worst, float(np.max(np.abs(jac - num) / denom)))
            if worst > tolerance:
                offenders.append(fid)
        return offenders

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        variables = [
            {
                "kind": vid.kind.value,
                "index": vid.index,
                "value": self._values[vid].tolist(),
                "fixed": vid in self._fixed,
            }
            for vid in self._order
        ]
        factors = []
        for fid in sorted(self._factors):
            f = self._factors[fid]
            factors.append(
                {
                    "id": fid,
                    "kind": f.kind.value,
                    "variables": [vid.key() for vid in f.variables],
                    "measurement": _encode_measurement(f),
                    "information": f.information.tolist(),
                }
            )
        return {"variables": variables, "factors": factors}

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=indent)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FactorGraph":
        graph = cls()
        for var in doc["variables"]:
            kind = VarKind(var["kind"])
            vid = graph.add_variable(kind, var["value"], fixed=bool(var.get("fixed")))
            if vid.index != var["index"]:
                raise GraphError(
                    f"variable indices must be stored contiguously per kind, got {var}"
                )
        for fac in sorted(doc["factors"], key=lambda f: f["id"]):
            kind = FactorKind(fac["kind"])
            variables = tuple(VariableId(VarKind(k), i) for k, i in fac["variables"])
            measurement = _decode_measurement(kind, fac.get("measurement"))
            fid = graph.add_factor(
                Factor(kind, variables, measurement, np.asarray(fac["information"]))
            )
            if fid != fac["id"]:
                raise GraphError("factor ids must be stored contiguously")
        return graph

    @classmethod
    def from_json(cls, text: str) -> "FactorGraph":
        return cls.from_json_dict(json.loads(text))


def _encode_measurement(factor: Factor):
    m = factor.measurement
    if factor.kind == FactorKind.ODOMETRY:
        return {"rel": m.as_array().tolist()}
    if factor.kind == FactorKind.POSE_PLANE:
        return {"plane": [float(m[0]), float(m[1])]}
    if factor.kind == FactorKind.WALL_CENTER:
        return {"start": np.asarray(m, float).tolist()}
    if factor.kind == FactorKind.DOORWAY_TO_ROOMS:
        return {"offsets": [np.asarray(m[0], float).tolist(), np.asarray(m[1], float).tolist()]}
    if factor.kind == FactorKind.ROOM_TO_ROOM:
        return {"offset": np.asarray(m if m is not None else (0.0, 0.0), float).tolist()}
    if factor.kind == FactorKind.PRIOR:
        return {"value": np.asarray(m, float).tolist()}
    return None


def _decode_measurement(kind: FactorKind, doc):
    if kind == FactorKind.ODOMETRY:
        return Pose2.from_array(doc["rel"])
    if kind == FactorKind.POSE_PLANE:
        return tuple(doc["plane"])
    if kind == FactorKind.WALL_CENTER:
        return np.asarray(doc["start"], float)
    if kind == FactorKind.DOORWAY_TO_ROOMS:
        return (np.asarray(doc["offsets"][0], float), np.asarray(doc["offsets"][1], float))
    if kind == FactorKind.ROOM_TO_ROOM:
        return np.asarray(doc["offset"], float)
    if kind == FactorKind.PRIOR:
        return np.asarray(doc["value"], float)
    return None
