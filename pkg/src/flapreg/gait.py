"""Regulator-length sweeps over a linkage and scalar gait metrics.

Each swept length is substituted into one named bar and solved as an
independent full-revolution trajectory.  The envelope of the marker point
(wingtip) is summarized by its enclosed area and bounding-box diagonal; the
shoulder sweep by the peak-to-peak angle of a pivot->ray segment.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegeneratePath, FlapregError, NonConvergence, SweepError
from .linkage import GaitTrajectory, LinkageDef, Pose, SolverConfig, solve_pose, sweep_trajectory

# Largest length change per homotopy stage when the direct solve fails.
HOMOTOPY_STEP_MM = 0.05
_CENTI = Decimal("0.01")


@dataclass(frozen=True)
class LengthSweepSpec:
    base_def: LinkageDef
    target_bar: str
    lengths: tuple[float, ...]
    marker_point: str
    shoulder_pivot: str = "J5"
    shoulder_ray: str = "J9"

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if not self.lengths:
            raise ValueError("lengths must be non-empty")
        if any(v <= 0 for v in self.lengths):
            raise ValueError("lengths must all be > 0")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ValueError("lengths must be strictly increasing")
        if self.target_bar not in self.base_def.named_lengths:
            raise ValueError(f"no bar named {self.target_bar!r}")
        for p in (self.marker_point, self.shoulder_pivot, self.shoulder_ray):
            if p not in self.base_def.points:
                raise ValueError(f"unknown point {p!r}")


@dataclass(frozen=True)
class GaitMetrics:
    sweep_amplitude_deg: float
    envelope_area_mm2: float
    marker_extent_mm: float


def shoelace_area(path: np.ndarray) -> float:
    """Signed area of the closed polygon through ``path`` (counterclockwise > 0)."""
    x, y = path[:, 0], path[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def segment_angles(traj: GaitTrajectory, pivot: str, ray: str) -> np.ndarray:
    """Unwrapped ground-frame angle (rad) of the ``pivot -> ray`` segment per pose."""
    d = traj.path(ray) - traj.path(pivot)
    return np.unwrap(np.arctan2(d[:, 1], d[:, 0]))


def compute_metrics(traj: GaitTrajectory, shoulder_pivot: str = "J5",
                    shoulder_ray: str = "J9") -> GaitMetrics:
    path = traj.marker_path
    extent = float(np.hypot(*np.ptp(path, axis=0)))
    if extent <= 1e-12:
        raise DegeneratePath(f"marker {traj.marker_point!r} does not move")
    amp = math.degrees(float(np.ptp(segment_angles(traj, shoulder_pivot, shoulder_ray))))
    return GaitMetrics(amp, abs(shoelace_area(path)), extent)


def _start_pose(base: LinkageDef, bar: str, length: float, cfg: SolverConfig) -> Pose:
    """Crank-angle-0 pose at ``length``, by homotopy from the nominal length if needed."""
    linkage = base.with_length(bar, length)
    try:
        return solve_pose(linkage, 0.0, None, cfg)
    except FlapregError:
        pass
    nominal = base.named_lengths[bar].length_mm
    n = max(1, math.ceil(abs(length - nominal) / HOMOTOPY_STEP_MM))
    pose = base.reference_pose()
    for k in range(1, n + 1):
        stage = nominal + (length - nominal) * k / n
        pose = solve_pose(base.with_length(bar, stage), 0.0, pose, cfg)
    return pose


def _solve_length(spec: LengthSweepSpec, length: float, cfg: SolverConfig):
    try:
        start = _start_pose(spec.base_def, spec.target_bar, length, cfg)
        linkage = spec.base_def.with_length(spec.target_bar, length)
        traj = sweep_trajectory(linkage, cfg, spec.marker_point, initial_guess=start)
    except FlapregError as exc:
        where = ""
        if isinstance(exc, NonConvergence) and exc.crank_angle is not None:
            where = f" at crank angle {exc.crank_angle:.6g} rad"
        raise SweepError(f"{spec.target_bar} = {length} mm: {exc.code}{where}: {exc}",
                         length, exc) from exc
    traj = GaitTrajectory(traj.poses, length_mm=length, marker_point=spec.marker_point)
    return traj, compute_metrics(traj, spec.shoulder_pivot, spec.shoulder_ray)


def run_length_sweep(spec: LengthSweepSpec, cfg: SolverConfig | None = None,
                     threads: int = 1) -> list[tuple[GaitTrajectory, GaitMetrics]]:
    """Solve one trajectory per swept length; results follow ``spec.lengths`` order."""
    cfg = cfg or SolverConfig()
    if threads == 1 or len(spec.lengths) == 1:
        return [_solve_length(spec, L, cfg) for L in spec.lengths]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(lambda L: _solve_length(spec, L, cfg), spec.lengths))


def parse_length_range(text: str) -> tuple[float, ...]:
    """``start:end:count`` with inclusive endpoints, or a comma list of values.

    Range values are rounded half-up to 0.01 mm, the resolution of the length
    tables, using decimal arithmetic so ``28.58:30.08:9`` gives 28.96 and 29.71.
    """
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"length range must be start:end:count, got {text!r}")
        start, count = float(parts[0]), int(parts[2])
        if count < 1:
            raise ValueError("count must be >= 1")
        if count == 1:
            return (start,)
        step = (Decimal(parts[1]) - Decimal(parts[0])) / (count - 1)
        return tuple(float((Decimal(parts[0]) + step * k).quantize(_CENTI, ROUND_HALF_UP))
                     for k in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())


def format_length(length: float) -> str:
    return repr(float(length))


def write_sweep(results: Sequence[tuple[GaitTrajectory, GaitMetrics]], out_dir,
                point_order: Sequence[str]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    header = ["crank_angle_rad"] + [f"{p}_{c}" for p in point_order for c in ("x", "y")]
    for traj, _ in results:
        path = out / f"gait_L{format_length(traj.length_mm)}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for pose in traj.poses:
                row = [repr(pose.crank_angle)]
                for p in point_order:
                    x, y = pose.coordinates[p]
                    row += [repr(x), repr(y)]
                w.writerow(row)
        written.append(path)
    path = out / "metrics.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["length_mm", "sweep_amplitude_deg", "envelope_area_mm2", "marker_extent_mm"])
        for traj, m in results:
            w.writerow([format_length(traj.length_mm), repr(m.sweep_amplitude_deg),
                        repr(m.envelope_area_mm2), repr(m.marker_extent_mm)])
    written.append(path)
    return written
