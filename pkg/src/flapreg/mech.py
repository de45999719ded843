"""Candidate regulator mechanisms: stroke, mechanical advantage and feasibility.

Three ideal (lossless) transmissions sit between the linear actuator and the
regulator output:

* single triangle: the actuator slides one vertex of a triangle with a fixed
  hypotenuse link, the opposite vertex moves perpendicular to it;
* lever-fulcrum: a plain lever of two arms;
* direct drive: the actuator is the regulator.

Mechanical advantage is reported as ``ma_effective = d_input / d_output``, the
cumulative ratio.  In the lossless model this equals the force gain, so the
output force deliverable by an actuator is ``dynamic_force * min(ma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .actuator import ActuatorSpec
from .budget import DIRECT_DRIVE_QUOTED_GF, RegulatorRequirement
from .errors import Infeasible, TriangleDegenerate

REFERENCE_TRIANGLE = dict(d_initial_mm=8.0, base_mm=5.0, hyp_mm=20.0, stroke_mm=6.0)


@dataclass(frozen=True)
class TriangleMechanism:
    d_initial_mm: float
    base_mm: float
    hyp_mm: float
    stroke_mm: float

    def __post_init__(self):
        if not self.hyp_mm > 0:
            raise ValueError("hyp_mm must be > 0")
        if not self.stroke_mm > 0:
            raise ValueError("stroke_mm must be > 0")
        # |x| is piecewise linear in d_input, so its maximum sits at an end.
        for d in (0.0, self.stroke_mm):
            if not abs(self._half_leg(d)) < self.hyp_mm:
                raise TriangleDegenerate(
                    f"triangle invalid at d_input = {d} mm: half-leg "
                    f"{abs(self._half_leg(d))} >= hyp {self.hyp_mm}")

    def _half_leg(self, d_input):
        return 0.5 * (d_input + self.d_initial_mm - self.base_mm)

    @classmethod
    def reference(cls) -> "TriangleMechanism":
        return cls(**REFERENCE_TRIANGLE)


def triangle_output(mech: TriangleMechanism, d_input_mm: float) -> float:
    if not 0 <= d_input_mm <= mech.stroke_mm:
        raise ValueError(f"d_input {d_input_mm} mm outside [0, {mech.stroke_mm}]")
    x = mech._half_leg(d_input_mm)
    rad = mech.hyp_mm ** 2 - x * x
    if rad <= 0:
        raise TriangleDegenerate(f"radicand {rad} <= 0 at d_input = {d_input_mm} mm")
    return x / math.sqrt(rad) * d_input_mm


def _triangle_arrays(mech: TriangleMechanism, d: np.ndarray):
    """Vectorized output and its derivative over input positions ``d``."""
    h2 = mech.hyp_mm ** 2
    x = mech._half_leg(d)
    rad = h2 - x * x
    if np.any(rad <= 0):
        raise TriangleDegenerate("radicand <= 0 inside the stroke")
    f = x / np.sqrt(rad)
    # d(out)/d(in) = f + d * f'(x) * dx/dd, with f'(x) = h^2 / rad^1.5 and dx/dd = 1/2
    return f * d, f + 0.5 * d * h2 / rad ** 1.5


def triangle_ma_limit(mech: TriangleMechanism) -> float:
    """Limit of ``d_input / d_output`` as the input goes to zero from above."""
    x0 = mech._half_leg(0.0)
    if x0 <= 0:
        return math.inf
    return math.sqrt(mech.hyp_mm ** 2 - x0 * x0) / x0


@dataclass(frozen=True)
class MechanismCurve:
    kind: str
    d_input_mm: np.ndarray
    d_output_mm: np.ndarray
    ma_effective: np.ndarray
    ma_instantaneous: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.d_input_mm
        if d.size < 1 or d[0] <= 0 or np.any(np.diff(d) <= 0):
            raise ValueError("d_input must start above 0 and strictly increase")

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.d_input_mm.tolist(), self.d_output_mm.tolist(),
                        self.ma_effective.tolist()))

    def rows(self):
        return zip(self.d_input_mm.tolist(), self.d_output_mm.tolist(),
                   self.ma_effective.tolist(), self.ma_instantaneous.tolist())


def _inputs(stroke_mm: float, n_samples: int) -> np.ndarray:
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    return stroke_mm * np.arange(1, n_samples + 1) / n_samples


def _finish(kind, d, out, slope, params) -> MechanismCurve:
    if np.any(out <= 0):
        raise ValueError(f"{kind} output is not positive over the stroke")
    return MechanismCurve(kind, d, out, d / out, 1.0 / slope, params)


def ma_curve(mech: TriangleMechanism, n_samples: int = 600) -> MechanismCurve:
    d = _inputs(mech.stroke_mm, n_samples)
    out, slope = _triangle_arrays(mech, d)
    return _finish("triangle", d, out, slope, dict(vars(mech)))


def lever_output(arm_in_mm: float, arm_out_mm: float, d_input_mm: float) -> float:
    if not (arm_in_mm > 0 and arm_out_mm > 0):
        raise ValueError("lever arms must be > 0")
    return d_input_mm * arm_out_mm / arm_in_mm


def lever_force_ma(arm_in_mm: float, arm_out_mm: float) -> float:
    return arm_in_mm / arm_out_mm


def lever_curve(arm_in_mm: float, arm_out_mm: float, stroke_mm: float,
                n_samples: int = 600) -> MechanismCurve:
    d = _inputs(stroke_mm, n_samples)
    out = lever_output(arm_in_mm, arm_out_mm, 1.0) * d
    slope = np.full_like(d, arm_out_mm / arm_in_mm)
    return _finish("lever", d, out, slope,
                   dict(arm_in_mm=arm_in_mm, arm_out_mm=arm_out_mm, stroke_mm=stroke_mm))


def direct_drive_output(d_input_mm: float) -> float:
    return d_input_mm


def direct_curve(stroke_mm: float, n_samples: int = 600) -> MechanismCurve:
    d = _inputs(stroke_mm, n_samples)
    return _finish("direct", d, d.copy(), np.ones_like(d), dict(stroke_mm=stroke_mm))


@dataclass(frozen=True)
class FeasibilityReport:
    output_stroke_mm: float
    min_force_ma: float
    deliverable_force_gf: float
    required_displacement_mm: float
    required_force_gf: float
    displacement_ok: bool
    force_ok: bool
    # extra force thresholds (gf) checked against the deliverable force
    threshold_checks: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.displacement_ok and self.force_ok

    def to_dict(self) -> dict:
        return {
            "output_stroke_mm": self.output_stroke_mm,
            "min_force_ma": self.min_force_ma,
            "deliverable_force_gf": self.deliverable_force_gf,
            "required_displacement_mm": self.required_displacement_mm,
            "required_force_gf": self.required_force_gf,
            "displacement": "PASS" if self.displacement_ok else "FAIL",
            "force": "PASS" if self.force_ok else "FAIL",
            "feasible": self.feasible,
            "threshold_checks": {repr(k): ("PASS" if v else "FAIL")
                                 for k, v in self.threshold_checks.items()},
        }


def feasibility(curve: MechanismCurve, act: ActuatorSpec, req: RegulatorRequirement,
                also_check_gf=(DIRECT_DRIVE_QUOTED_GF,)) -> FeasibilityReport:
    """Judge a mechanism curve driven by ``act`` against ``req``.

    Only samples reachable within the actuator stroke are used.  An infinite
    dynamic force passes the force check whatever the mechanical advantage.
    """
    used = curve.d_input_mm <= act.stroke_mm * (1 + 1e-12)
    if not np.any(used):
        raise ValueError("actuator stroke is shorter than the first curve sample")
    stroke_out = float(np.max(curve.d_output_mm[used]))
    min_ma = float(np.min(curve.ma_effective[used]))
    force = math.inf if math.isinf(act.dynamic_force_gf) else act.dynamic_force_gf * min_ma
    checks = {float(req.actuation_force_gf): force >= req.actuation_force_gf}
    for thr in also_check_gf:
        checks[float(thr)] = force >= thr
    return FeasibilityReport(stroke_out, min_ma, force, req.displacement_mm,
                             req.actuation_force_gf, stroke_out >= req.displacement_mm,
                             force >= req.actuation_force_gf, checks)


@dataclass(frozen=True)
class TriangleBounds:
    d_initial_mm: tuple[float, float] = (0.0, 20.0)
    base_mm: tuple[float, float] = (0.0, 20.0)
    hyp_mm: tuple[float, float] = (1.0, 40.0)

    def __post_init__(self):
        for name in ("d_initial_mm", "base_mm", "hyp_mm"):
            lo, hi = getattr(self, name)
            if not (lo <= hi and lo >= 0):
                raise ValueError(f"bounds {name} must satisfy 0 <= lo <= hi")
        if not self.hyp_mm[0] > 0:
            raise ValueError("hyp bounds must be positive")

    @classmethod
    def singleton(cls, mech: TriangleMechanism) -> "TriangleBounds":
        return cls((mech.d_initial_mm,) * 2, (mech.base_mm,) * 2, (mech.hyp_mm,) * 2)


def _axis(lo, hi, n):
    return np.array([lo]) if lo == hi else np.linspace(lo, hi, n)


def _score(di, b, h, stroke, act, req):
    """Feasibility mask plus output stroke and deliverable force on a grid.

    With d_initial >= base the half-leg stays non-negative, so the output rises
    and the mechanical advantage falls monotonically along the stroke: both
    constraints bind at full stroke.
    """
    x_end = 0.5 * (stroke + di - b)
    valid = (di >= b) & (np.abs(0.5 * (di - b)) < h) & (x_end < h)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = x_end / np.sqrt(np.where(valid, h * h - x_end * x_end, np.nan))
        out = f * stroke
        force = act.dynamic_force_gf / f
    valid &= np.isfinite(out) & (out > 0)
    ok = valid & (out >= req.displacement_mm) & (force >= req.actuation_force_gf)
    return ok, np.where(valid, out, -np.inf), np.where(valid, force, -np.inf)


def _pick(ok, di, b, h):
    """Index of the feasible point with least hyp, ties by (d_initial, base, hyp)."""
    idx = np.flatnonzero(ok.ravel())
    keys = np.lexsort((b.ravel()[idx], di.ravel()[idx], h.ravel()[idx]))
    return idx[keys[0]]


def optimize_triangle(req: RegulatorRequirement, act: ActuatorSpec,
                      bounds: TriangleBounds | None = None, grid: int = 50,
                      refine: int = 10, verify_samples: int = 600) -> TriangleMechanism:
    """Smallest-hypotenuse triangle meeting ``req`` with ``act`` over its full stroke.

    A ``grid``-per-axis search is followed by one refinement pass over the
    neighbouring cells at ``refine`` times the resolution.

    Raises
    ------
    Infeasible
        When no grid point meets both constraints.  The best deliverable
        force and output stroke seen are attached.
    """
    bounds = bounds or TriangleBounds()
    stroke = act.stroke_mm
    axes = [_axis(*bounds.d_initial_mm, grid), _axis(*bounds.base_mm, grid),
            _axis(*bounds.hyp_mm, grid)]
    DI, B, H = np.meshgrid(*axes, indexing="ij")
    ok, out, force = _score(DI, B, H, stroke, act, req)
    if not ok.any():
        best_f = float(force.max()) if np.isfinite(force.max()) else None
        best_s = float(out.max()) if np.isfinite(out.max()) else None
        raise Infeasible(
            f"no triangle meets {req.displacement_mm} mm / {req.actuation_force_gf} gf "
            f"with a {act.dynamic_force_gf} gf, {stroke} mm actuator "
            f"(best force {best_f} gf, best stroke {best_s} mm)", best_f, best_s)
    i = np.unravel_index(_pick(ok, DI, B, H), DI.shape)
    fine = []
    for ax, k, (lo, hi) in zip(axes, i, (bounds.d_initial_mm, bounds.base_mm, bounds.hyp_mm)):
        if ax.size == 1:
            fine.append(ax)
            continue
        cell = ax[1] - ax[0]
        pts = np.linspace(ax[k] - cell, ax[k] + cell, 2 * refine + 1)
        fine.append(np.unique(np.append(np.clip(pts, lo, hi), ax[k])))
    DI, B, H = np.meshgrid(*fine, indexing="ij")
    ok, _, _ = _score(DI, B, H, stroke, act, req)
    j = _pick(ok, DI, B, H)  # the coarse winner is in this grid, so ok.any()
    mech = TriangleMechanism(float(DI.ravel()[j]), float(B.ravel()[j]),
                             float(H.ravel()[j]), stroke)
    if not feasibility(ma_curve(mech, verify_samples), act, req, ()).feasible:
        raise Infeasible("optimizer result failed re-verification")
    return mech
