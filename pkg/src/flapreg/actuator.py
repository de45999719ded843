"""Quasi-static slip-stick (inertial) piezo linear actuator.

Motion is pulse-indexed: each drive pulse advances the output fixture by one
step along the shaft.  An opposing axial load derates the step linearly,
``step * (1 - load / dynamic_force)``, and stalls the actuator outright above
the rated dynamic force.  When idle the fixture is held by static friction up
to the holding force.

Position is tracked as an exact rational number of micrometres so that step
accounting is exact: ``n`` zero-load pulses move exactly ``n * step`` and a
burst split in two lands on the same position as the unsplit burst.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .errors import TargetUnreachable

DATA_DIR = Path(__file__).parent / "data"


def _exact(value) -> Fraction:
    """Exact rational for a decimal-looking number (0.1 -> 1/10)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError("value must be finite")
    return Fraction(repr(float(value))) if isinstance(value, float) else Fraction(value)


@dataclass(frozen=True)
class ActuatorSpec:
    stroke_mm: float
    dynamic_force_gf: float
    holding_force_gf: float
    step_size_um_range: tuple[float, float] = (0.04, 0.2)
    default_step_um: float = 0.1
    mass_g: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not self.stroke_mm > 0:
            raise ValueError("stroke_mm must be > 0")
        if not self.dynamic_force_gf > 0:
            raise ValueError("dynamic_force_gf must be > 0")
        if not self.holding_force_gf >= self.dynamic_force_gf:
            raise ValueError("holding_force_gf must be >= dynamic_force_gf")
        lo, hi = self.step_size_um_range
        if not 0 < lo <= hi:
            raise ValueError("step size range must be positive and ordered")
        if not lo <= self.default_step_um <= hi:
            raise ValueError("default step outside the step size range")

    @property
    def stroke_um(self) -> float:
        return self.stroke_mm * 1000.0

    def to_dict(self) -> dict:
        lo, hi = self.step_size_um_range
        return {"stroke_mm": self.stroke_mm, "dynamic_force_gf": self.dynamic_force_gf,
                "holding_force_gf": self.holding_force_gf,
                "step_size_um": {"min": lo, "max": hi, "default": self.default_step_um},
                "mass_g": self.mass_g}


_SPEC_KEYS = {"stroke_mm", "dynamic_force_gf", "holding_force_gf", "step_size_um", "mass_g"}


def parse_actuator_spec(doc: dict, name: str = "") -> ActuatorSpec:
    extra = set(doc) - _SPEC_KEYS - {"name", "notes"}
    if extra:
        raise ValueError(f"unknown actuator spec keys: {sorted(extra)}")
    steps = doc.get("step_size_um", {})
    return ActuatorSpec(
        stroke_mm=float(doc["stroke_mm"]),
        dynamic_force_gf=float(doc["dynamic_force_gf"]),
        holding_force_gf=float(doc["holding_force_gf"]),
        step_size_um_range=(float(steps.get("min", 0.04)), float(steps.get("max", 0.2))),
        default_step_um=float(steps.get("default", 0.1)),
        mass_g=float(doc.get("mass_g", 0.0)),
        name=doc.get("name", name),
    )


def load_actuator_spec(path) -> ActuatorSpec:
    """Load a spec JSON; bare names ``tula50`` / ``tula70`` resolve to packaged files."""
    p = Path(path)
    if not p.exists() and (DATA_DIR / f"{path}.json").exists():
        p = DATA_DIR / f"{path}.json"
    with open(p, encoding="utf-8") as fh:
        return parse_actuator_spec(json.load(fh), name=p.stem)


def tula50() -> ActuatorSpec:
    return load_actuator_spec("tula50")


def tula70() -> ActuatorSpec:
    return load_actuator_spec("tula70")


@dataclass(frozen=True)
class DriveCommand:
    direction: int
    pulse_count: int
    load_gf: float = 0.0

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.pulse_count < 0:
            raise ValueError("pulse_count must be >= 0")
        if not self.load_gf >= 0:
            raise ValueError("load_gf must be >= 0")


@dataclass(frozen=True)
class StepResult:
    pulses_applied: int
    displacement_um: float
    stalled: bool
    end_position_um: float
    clamped_pulses: int = 0


@dataclass
class SeekResult:
    pulses: int
    end_position_um: float
    reached: bool
    # (cumulative pulse index, position_um) after every burst, starting at (0, start)
    trace: list[tuple[int, float]] = field(default_factory=list)


class SlipStickActuator:
    """Stateful actuator; mutate only through its methods, from one thread."""

    def __init__(self, spec: ActuatorSpec, position_um: float = 0.0,
                 step_size_um: float | None = None, slip_rate_um_per_s: float = 0.0):
        self.spec = spec
        step = spec.default_step_um if step_size_um is None else step_size_um
        lo, hi = spec.step_size_um_range
        if not lo <= step <= hi:
            raise ValueError(f"step size {step} um outside [{lo}, {hi}]")
        self._step = _exact(step)
        self._stroke = _exact(spec.stroke_mm) * 1000
        pos = _exact(position_um)
        if not 0 <= pos <= self._stroke:
            raise ValueError(f"position {position_um} um outside the stroke")
        self._pos = pos
        self.slip_rate_um_per_s = slip_rate_um_per_s

    @property
    def position_um(self) -> float:
        return float(self._pos)

    @property
    def step_size_um(self) -> float:
        return float(self._step)

    def stalls_under(self, load_gf: float) -> bool:
        return load_gf > self.spec.dynamic_force_gf

    def _effective_step(self, load_gf: float) -> Fraction:
        if self.stalls_under(load_gf):
            return Fraction(0)
        return self._step * (1 - _exact(load_gf) / _exact(self.spec.dynamic_force_gf))

    def effective_step_um(self, load_gf: float) -> float:
        return float(self._effective_step(load_gf))

    def apply_burst(self, cmd: DriveCommand) -> StepResult:
        n = cmd.pulse_count
        if self.stalls_under(cmd.load_gf):
            return StepResult(n, 0.0, n > 0, float(self._pos))
        per = self._effective_step(cmd.load_gf)
        start = self._pos
        target = start + cmd.direction * n * per
        end = min(max(target, Fraction(0)), self._stroke)
        moved = abs(end - start)
        clamped = 0
        if end != target and per > 0:
            clamped = n - math.ceil(moved / per)
        self._pos = end
        return StepResult(n, float(end - start), False, float(end), clamped)

    def hold_check(self, load_gf: float) -> bool:
        """Whether static friction holds the fixture against ``load_gf``."""
        return load_gf <= self.spec.holding_force_gf

    def idle(self, load_gf: float, duration_s: float) -> float:
        """Sit undriven under ``load_gf``; return back-driven slip in um (toward 0)."""
        if self.hold_check(load_gf) or self.slip_rate_um_per_s <= 0:
            return 0.0
        slip = min(_exact(self.slip_rate_um_per_s) * _exact(duration_s), self._pos)
        self._pos -= slip
        return -float(slip)

    def seek(self, target_um: float, load_profile: Callable[[float], float] | None = None,
             max_pulses: int = 10_000_000, burst_pulses: int = 100) -> SeekResult:
        """Drive toward ``target_um`` in bursts until within one step of it.

        ``load_profile`` maps position (um) to opposing load (gf) and is sampled
        at the start of each burst.  A burst that stalls, or whose derated step
        would advance less than one zero-load step over the whole burst, ends
        the seek with :class:`TargetUnreachable`.
        """
        target = _exact(target_um)
        if not 0 <= target <= self._stroke:
            raise ValueError(f"target {target_um} um outside [0, {float(self._stroke)}]")
        profile = load_profile or (lambda _p: 0.0)
        used = 0
        trace = [(0, float(self._pos))]
        while abs(target - self._pos) >= self._step:
            if used >= max_pulses:
                return SeekResult(used, float(self._pos), False, trace)
            load = float(profile(float(self._pos)))
            per = self._effective_step(load)
            if per == 0 or per * burst_pulses < self._step:
                raise TargetUnreachable(
                    f"stalled at {float(self._pos):.3f} um under {load:.3f} gf "
                    f"(dynamic force {self.spec.dynamic_force_gf} gf)",
                    stall_position_um=float(self._pos), trace=trace)
            remaining = abs(target - self._pos)
            n = min(burst_pulses, math.floor(remaining / per), max_pulses - used)
            direction = 1 if target > self._pos else -1
            self.apply_burst(DriveCommand(direction, n, load))
            used += n
            trace.append((used, float(self._pos)))
        return SeekResult(used, float(self._pos), True, trace)
