"""Planar rigid-link mechanisms driven by a single crank angle.

A mechanism is a set of named points, some fixed to ground, joined by rigid
distance constraints ("bars").  One bar is the driver: its free end is placed
at ``pivot + L (cos t, sin t)`` for crank angle ``t``.  Every other bar adds one
equation ``|p_a - p_b| = L``.  The definition must be square: two equations
per free point.

Poses are solved by damped Newton iteration; trajectories by continuation in
crank angle.  Angles are radians, counterclockwise from +x.  Lengths are mm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import LinkageDefinitionError, NonConvergence, SingularJacobian

Point = tuple[float, float]

MAX_HALVINGS = 8
POLISH_STEPS = 2
SINGULAR_RCOND = 1e-12


@dataclass(frozen=True)
class Bar:
    a: str
    b: str
    length_mm: float
    name: str | None = None


@dataclass(frozen=True)
class Driver:
    pivot: str
    point: str
    name: str


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-9
    max_iterations: int = 50
    continuation_step: float = math.pi / 180
    # Pose-to-pose displacement above this is treated as a branch hop.
    max_step_displacement_mm: float = 5.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not 0 < self.continuation_step <= math.pi / 8 + 1e-15:
            raise ValueError(
                f"continuation_step must be in (0, pi/8], got {self.continuation_step}")
        if not self.max_step_displacement_mm > 0:
            raise ValueError("max_step_displacement_mm must be > 0")


@dataclass(frozen=True)
class Pose:
    crank_angle: float
    coordinates: Mapping[str, Point]
    residual: float

    def __getitem__(self, point_id: str) -> Point:
        return self.coordinates[point_id]

    def array(self, order: Sequence[str] | None = None) -> np.ndarray:
        """Coordinates as an ``(n, 2)`` array in ``order`` (default: insertion order)."""
        ids = list(self.coordinates) if order is None else order
        return np.array([self.coordinates[p] for p in ids], dtype=float)


@dataclass(frozen=True)
class LinkageDef:
    """Immutable mechanism definition.

    ``guess`` holds the packaged reference coordinates of every free point; it
    fixes the assembly branch used at crank angle 0.
    """

    points: tuple[str, ...]
    ground: Mapping[str, Point]
    bars: tuple[Bar, ...]
    driver: Driver
    guess: Mapping[str, Point] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "bars", tuple(self.bars))
        object.__setattr__(self, "ground", MappingProxyType(
            {k: (float(v[0]), float(v[1])) for k, v in self.ground.items()}))
        object.__setattr__(self, "guess", MappingProxyType(
            {k: (float(v[0]), float(v[1])) for k, v in self.guess.items()}))
        self._validate()

    def _validate(self):
        ids = self.points
        if len(set(ids)) != len(ids):
            raise LinkageDefinitionError("duplicate point ids")
        known = set(ids)
        for g in self.ground:
            if g not in known:
                raise LinkageDefinitionError(f"ground point {g!r} is not a declared point")
        names = [b.name for b in self.bars if b.name is not None]
        if len(set(names)) != len(names):
            raise LinkageDefinitionError("duplicate bar names")
        for b in self.bars:
            if b.a not in known or b.b not in known:
                raise LinkageDefinitionError(f"bar {b.a}-{b.b} references an unknown point")
            if b.a == b.b:
                raise LinkageDefinitionError(f"bar {b.a}-{b.b} joins a point to itself")
            if not math.isfinite(b.length_mm):
                raise LinkageDefinitionError(f"bar {b.a}-{b.b} has non-finite length")
        d = self.driver
        if d.pivot not in known or d.point not in known:
            raise LinkageDefinitionError("driver references an unknown point")
        if d.point in self.ground:
            raise LinkageDefinitionError("driven point cannot be grounded")
        drv = self.named_lengths.get(d.name)
        if drv is None:
            raise LinkageDefinitionError(f"driver bar {d.name!r} is not a named bar")
        if {drv.a, drv.b} != {d.pivot, d.point}:
            raise LinkageDefinitionError(
                f"driver bar {d.name!r} must join {d.pivot} and {d.point}")
        # Only the crank may have zero length (degenerate driver).
        if drv.length_mm < 0:
            raise LinkageDefinitionError("driver length must be >= 0")
        for b in self.bars:
            if b is not drv and not b.length_mm > 0:
                raise LinkageDefinitionError(f"bar {b.a}-{b.b} must have length > 0")
        free = self.free_points
        n_eq = 2 + len(self.bars) - 1
        if n_eq != 2 * len(free):
            raise LinkageDefinitionError(
                f"system is not square: {n_eq} equations for {len(free)} free points")
        missing = [p for p in free if p not in self.guess]
        if missing:
            raise LinkageDefinitionError(f"no reference guess for free points {missing}")

    @property
    def free_points(self) -> tuple[str, ...]:
        return tuple(p for p in self.points if p not in self.ground)

    @property
    def named_lengths(self) -> Mapping[str, Bar]:
        return {b.name: b for b in self.bars if b.name is not None}

    @property
    def driver_bar(self) -> Bar:
        return self.named_lengths[self.driver.name]

    @property
    def driver_length(self) -> float:
        return self.driver_bar.length_mm

    def with_length(self, name: str, length_mm: float) -> LinkageDef:
        """Copy with the named bar set to ``length_mm``."""
        if name not in self.named_lengths:
            raise LinkageDefinitionError(f"no bar named {name!r}")
        bars = tuple(replace(b, length_mm=float(length_mm)) if b.name == name else b
                     for b in self.bars)
        return replace(self, bars=bars)

    def translated(self, dx: float, dy: float) -> LinkageDef:
        ground = {k: (x + dx, y + dy) for k, (x, y) in self.ground.items()}
        guess = {k: (x + dx, y + dy) for k, (x, y) in self.guess.items()}
        return replace(self, ground=ground, guess=guess)

    def reference_pose(self) -> Pose:
        """Pose assembled from ground coordinates and the reference guess."""
        coords = {p: self.ground[p] if p in self.ground else self.guess[p]
                  for p in self.points}
        d = self.driver
        px, py = coords[d.pivot]
        qx, qy = coords[d.point]
        angle = math.atan2(qy - py, qx - px) if (qx, qy) != (px, py) else 0.0
        return Pose(angle, MappingProxyType(coords), math.inf)


@dataclass(frozen=True)
class GaitTrajectory:
    """Solved poses over one crank revolution.

    ``length_mm`` is the swept bar length when produced by a length sweep, and
    ``marker_point`` the point whose path is the trajectory envelope.
    """

    poses: tuple[Pose, ...]
    length_mm: float | None = None
    marker_point: str | None = None

    @property
    def crank_angles(self) -> np.ndarray:
        return np.array([p.crank_angle for p in self.poses])

    def path(self, point_id: str) -> np.ndarray:
        return np.array([p.coordinates[point_id] for p in self.poses], dtype=float)

    @property
    def marker_path(self) -> np.ndarray:
        if self.marker_point is None:
            raise ValueError("trajectory has no marker point")
        return self.path(self.marker_point)

    def closure_error(self) -> float:
        """Largest point displacement between the first and last pose."""
        a = self.poses[0].array()
        b = self.poses[-1].array(list(self.poses[0].coordinates))
        return float(np.max(np.hypot(*(a - b).T)))


# ---------------------------------------------------------------------------
# Newton solver


class _System:
    """Index bookkeeping for residual and Jacobian evaluation."""

    def __init__(self, linkage: LinkageDef):
        self.linkage = linkage
        self.ids = linkage.points
        index = {p: i for i, p in enumerate(self.ids)}
        self.free = linkage.free_points
        self.free_index = np.array([index[p] for p in self.free], dtype=int)
        # column offset of each point in the unknown vector, -1 for ground
        col = np.full(len(self.ids), -1, dtype=int)
        for k, p in enumerate(self.free):
            col[index[p]] = 2 * k
        self.col = col
        drv = linkage.driver_bar
        bars = [b for b in linkage.bars if b is not drv]
        self.ia = np.array([index[b.a] for b in bars], dtype=int)
        self.ib = np.array([index[b.b] for b in bars], dtype=int)
        self.lengths = np.array([b.length_mm for b in bars], dtype=float)
        self.all_a = np.array([index[b.a] for b in linkage.bars], dtype=int)
        self.all_b = np.array([index[b.b] for b in linkage.bars], dtype=int)
        self.all_len = np.array([b.length_mm for b in linkage.bars], dtype=float)
        self.pivot = index[linkage.driver.pivot]
        self.driven = index[linkage.driver.point]
        self.crank = linkage.driver_length
        self.base = np.zeros((len(self.ids), 2))
        for p, xy in linkage.ground.items():
            self.base[index[p]] = xy

    def coords(self, x: np.ndarray) -> np.ndarray:
        P = self.base.copy()
        P[self.free_index] = x.reshape(-1, 2)
        return P

    def residual(self, P: np.ndarray, angle: float) -> np.ndarray:
        target = P[self.pivot] + self.crank * np.array([math.cos(angle), math.sin(angle)])
        d = P[self.ia] - P[self.ib]
        dist = np.hypot(d[:, 0], d[:, 1])
        return np.concatenate([P[self.driven] - target, dist - self.lengths])

    def jacobian(self, P: np.ndarray) -> np.ndarray:
        n = 2 * len(self.free)
        J = np.zeros((2 + len(self.lengths), n))
        c = self.col[self.driven]
        J[0, c] = 1.0
        J[1, c + 1] = 1.0
        cp = self.col[self.pivot]
        if cp >= 0:
            J[0, cp] -= 1.0
            J[1, cp + 1] -= 1.0
        d = P[self.ia] - P[self.ib]
        dist = np.hypot(d[:, 0], d[:, 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(dist[:, None] > 0, d / dist[:, None], 0.0)
        rows = 2 + np.arange(len(self.lengths))
        for cols, sign in ((self.col[self.ia], 1.0), (self.col[self.ib], -1.0)):
            ok = cols >= 0
            for j in (0, 1):
                np.add.at(J, (rows[ok], cols[ok] + j), sign * u[ok, j])
        return J

    def full_residual(self, P: np.ndarray, angle: float) -> float:
        """Max violation over every bar, including the crank, and the driver angle."""
        d = P[self.all_a] - P[self.all_b]
        bars = np.abs(np.hypot(d[:, 0], d[:, 1]) - self.all_len)
        target = P[self.pivot] + self.crank * np.array([math.cos(angle), math.sin(angle)])
        drv = np.abs(P[self.driven] - target)
        return float(max(bars.max(initial=0.0), drv.max()))

    def pose(self, P: np.ndarray, angle: float) -> Pose:
        coords = {}
        for i, p in enumerate(self.ids):
            xy = self.linkage.ground.get(p)
            coords[p] = xy if xy is not None else (float(P[i, 0]), float(P[i, 1]))
        return Pose(float(angle), MappingProxyType(coords), self.full_residual(P, angle))


def _newton(system: _System, x: np.ndarray, angle: float, cfg: SolverConfig) -> np.ndarray:
    P = system.coords(x)
    r = system.residual(P, angle)
    err = np.max(np.abs(r))
    merit = float(r @ r)
    polished = 0
    iterations = 0
    while True:
        if err <= cfg.tolerance:
            # a couple of extra steps push the error far below tolerance
            if polished >= POLISH_STEPS or err == 0.0:
                return x
            polished += 1
        elif iterations >= cfg.max_iterations:
            break
        else:
            iterations += 1
        J = system.jacobian(P)
        s = np.linalg.svd(J, compute_uv=False)
        if s[0] == 0.0 or s[-1] / s[0] < SINGULAR_RCOND:
            if err <= cfg.tolerance:
                return x
            raise SingularJacobian(
                f"rank-deficient constraint Jacobian at crank angle {angle:.6g} rad",
                crank_angle=angle)
        step = np.linalg.solve(J, -r)
        alpha = 1.0
        best = None
        for _h in range(MAX_HALVINGS + 1):
            xt = x + alpha * step
            Pt = system.coords(xt)
            rt = system.residual(Pt, angle)
            mt = float(rt @ rt)
            if best is None or mt < best[2]:
                best = (xt, Pt, mt, rt)
            if mt < merit:
                break
            alpha *= 0.5
        if best[2] >= merit and err <= cfg.tolerance:
            # polishing cannot improve further
            return x
        x, P, merit, r = best
        err = np.max(np.abs(r))
    raise NonConvergence(
        f"residual {err:.3e} mm exceeds tolerance {cfg.tolerance:.1e} after "
        f"{cfg.max_iterations} iterations at crank angle {angle:.6g} rad",
        crank_angle=angle, residual=float(err))


def solve_pose(linkage: LinkageDef, crank_angle: float, initial_guess: Pose | None = None,
               cfg: SolverConfig | None = None) -> Pose:
    """Solve every free point at ``crank_angle`` starting from ``initial_guess``.

    The default guess is the definition's reference pose.

    Raises
    ------
    NonConvergence
        Residual still above tolerance after ``cfg.max_iterations``.
    SingularJacobian
        Constraint Jacobian lost rank (toggle or locked configuration).
    """
    cfg = cfg or SolverConfig()
    guess = initial_guess if initial_guess is not None else linkage.reference_pose()
    system = _System(linkage)
    missing = [p for p in system.free if p not in guess.coordinates]
    if missing:
        raise LinkageDefinitionError(f"initial guess lacks free points {missing}")
    x = np.array([guess.coordinates[p] for p in system.free], dtype=float).ravel()
    x = _newton(system, x, crank_angle, cfg)
    return system.pose(system.coords(x), crank_angle)


def revolution_angles(step: float) -> np.ndarray:
    """Crank angles 0 .. 2*pi inclusive with spacing no larger than ``step``."""
    n = int(math.ceil(2 * math.pi / step - 1e-9))
    return np.array([2 * math.pi * k / n for k in range(n + 1)])


def sweep_trajectory(linkage: LinkageDef, cfg: SolverConfig | None = None,
                     marker_point: str | None = None,
                     initial_guess: Pose | None = None) -> GaitTrajectory:
    """Solve one full crank revolution by continuation.

    Each pose is solved from the previous one; the first from ``initial_guess``
    (default: the reference guess).  From the third pose on, the guess is the
    secant extrapolation of the previous two, which keeps the sweep on its
    branch through change points where two assembly branches cross (a
    parallelogram folding through its collinear pose, for instance).
    """
    cfg = cfg or SolverConfig()
    system = _System(linkage)
    ref = initial_guess if initial_guess is not None else linkage.reference_pose()
    x = np.array([ref.coordinates[p] for p in system.free], dtype=float).ravel()
    poses = []
    before = None  # solution two poses back, once there is one
    for angle in revolution_angles(cfg.continuation_step):
        guess = x if before is None else 2 * x - before
        try:
            xn = _newton(system, guess, float(angle), cfg)
        except NonConvergence as exc:
            exc.last_pose = poses[-1] if poses else None
            raise
        except SingularJacobian as exc:
            raise NonConvergence(str(exc), crank_angle=float(angle),
                                 last_pose=poses[-1] if poses else None) from exc
        if poses:
            jump = np.max(np.hypot(*(xn - x).reshape(-1, 2).T))
            if jump > cfg.max_step_displacement_mm:
                raise NonConvergence(
                    f"branch hop suspected: a point moved {jump:.3f} mm in one "
                    f"continuation step at crank angle {angle:.6g} rad",
                    crank_angle=float(angle), last_pose=poses[-1])
        if poses:
            before = x
        poses.append(system.pose(system.coords(xn), float(angle)))
        x = xn
    return GaitTrajectory(tuple(poses), marker_point=marker_point)


# ---------------------------------------------------------------------------
# Builders and file format


def circle_intersection(c0: Point, r0: float, c1: Point, r1: float, side: int = 1) -> Point:
    """Intersection of two circles; ``side`` picks the point left (+1) or right (-1)
    of the directed line ``c0 -> c1``."""
    dx, dy = c1[0] - c0[0], c1[1] - c0[1]
    d = math.hypot(dx, dy)
    if d == 0 or d > r0 + r1 or d < abs(r0 - r1):
        raise LinkageDefinitionError("circles do not intersect; linkage cannot assemble")
    a = (r0 * r0 - r1 * r1 + d * d) / (2 * d)
    h = math.sqrt(max(r0 * r0 - a * a, 0.0))
    mx, my = c0[0] + a * dx / d, c0[1] + a * dy / d
    return (mx - side * h * dy / d, my + side * h * dx / d)


def four_bar(ground: float, crank: float, coupler: float, follower: float,
             origin: Point = (0.0, 0.0), ground_angle: float = 0.0,
             branch: int = 1, crank_angle: float = 0.0) -> LinkageDef:
    """Four-bar with crank pivot ``A`` and follower pivot ``B`` on ground.

    Moving joints are ``C`` (crank pin) and ``D`` (coupler-follower joint).  The
    reference guess is assembled at ``crank_angle`` on ``branch``.
    """
    ax, ay = origin
    bx = ax + ground * math.cos(ground_angle)
    by = ay + ground * math.sin(ground_angle)
    c = (ax + crank * math.cos(crank_angle), ay + crank * math.sin(crank_angle))
    d = circle_intersection(c, coupler, (bx, by), follower, side=branch)
    return LinkageDef(
        points=("A", "B", "C", "D"),
        ground={"A": (ax, ay), "B": (bx, by)},
        bars=(Bar("A", "C", crank, "crank"), Bar("C", "D", coupler, "coupler"),
              Bar("B", "D", follower, "follower")),
        driver=Driver("A", "C", "crank"),
        guess={"C": c, "D": d},
    )


_POINT_KEYS = {"id", "ground", "x", "y", "guess_x", "guess_y"}
_BAR_KEYS = {"a", "b", "length_mm", "name"}
_DRIVER_KEYS = {"pivot", "point", "name"}
_TOP_KEYS = {"points", "bars", "driver"}


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise LinkageDefinitionError(f"{where} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise LinkageDefinitionError(f"unknown keys in {where}: {sorted(extra)}")


def parse_linkage(doc: dict) -> LinkageDef:
    """Build a :class:`LinkageDef` from the JSON document structure."""
    _reject_unknown(doc, _TOP_KEYS, "linkage document")
    for k in _TOP_KEYS:
        if k not in doc:
            raise LinkageDefinitionError(f"linkage document lacks {k!r}")
    ids, ground, guess = [], {}, {}
    for i, pt in enumerate(doc["points"]):
        _reject_unknown(pt, _POINT_KEYS, f"points[{i}]")
        pid = pt.get("id")
        if not isinstance(pid, str):
            raise LinkageDefinitionError(f"points[{i}] needs a string id")
        ids.append(pid)
        try:
            if pt.get("ground", False):
                ground[pid] = (float(pt["x"]), float(pt["y"]))
            else:
                guess[pid] = (float(pt["guess_x"]), float(pt["guess_y"]))
        except KeyError as exc:
            raise LinkageDefinitionError(f"point {pid!r} lacks {exc.args[0]!r}") from None
    bars = []
    for i, b in enumerate(doc["bars"]):
        _reject_unknown(b, _BAR_KEYS, f"bars[{i}]")
        try:
            bars.append(Bar(b["a"], b["b"], float(b["length_mm"]), b.get("name")))
        except KeyError as exc:
            raise LinkageDefinitionError(f"bars[{i}] lacks {exc.args[0]!r}") from None
    drv = doc["driver"]
    _reject_unknown(drv, _DRIVER_KEYS, "driver")
    try:
        driver = Driver(drv["pivot"], drv["point"], drv["name"])
    except KeyError as exc:
        raise LinkageDefinitionError(f"driver lacks {exc.args[0]!r}") from None
    return LinkageDef(tuple(ids), ground, tuple(bars), driver, guess)


def linkage_to_dict(linkage: LinkageDef) -> dict:
    points = []
    for p in linkage.points:
        if p in linkage.ground:
            x, y = linkage.ground[p]
            points.append({"id": p, "ground": True, "x": x, "y": y})
        else:
            gx, gy = linkage.guess[p]
            points.append({"id": p, "ground": False, "guess_x": gx, "guess_y": gy})
    bars = []
    for b in linkage.bars:
        entry = {"a": b.a, "b": b.b, "length_mm": b.length_mm}
        if b.name is not None:
            entry["name"] = b.name
        bars.append(entry)
    d = linkage.driver
    return {"points": points, "bars": bars,
            "driver": {"pivot": d.pivot, "point": d.point, "name": d.name}}


def load_linkage(path) -> LinkageDef:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LinkageDefinitionError(f"{path}: invalid JSON ({exc})") from None
    return parse_linkage(doc)


DATA_DIR = Path(__file__).parent / "data"


def example_rig() -> LinkageDef:
    """The packaged Aerobat-like example rig (approximate, invented geometry)."""
    return load_linkage(DATA_DIR / "aerobat_delta.json")
