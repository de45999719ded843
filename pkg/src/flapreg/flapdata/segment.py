"""Stroke reversals and flap-cycle segmentation from the shoulder angle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoCyclesFound
from .records import AngleRecord, dominant_frequency, moving_average

SMOOTH_FRACTION = 0.05  # smoother window, fraction of the nominal period
FIT_FRACTION = 0.2      # half-width of the vertex fit, fraction of the period
# Reversal candidates must sit in the outer part of the calibrated range.
UPPER_GATE, LOWER_GATE = 0.6, 0.4


@dataclass(frozen=True)
class FlapCycle:
    index: int
    t_downstroke_start: float
    t_upstroke_start: float
    t_end: float

    @property
    def duration_s(self) -> float:
        return self.t_end - self.t_downstroke_start

    def shifted(self, dt: float) -> "FlapCycle":
        return FlapCycle(self.index, self.t_downstroke_start - dt,
                         self.t_upstroke_start - dt, self.t_end - dt)


def estimate_period(t: np.ndarray, angle: np.ndarray) -> float | None:
    f, _ = dominant_frequency(t, angle, (0.2, 50.0))
    return None if not f else 1.0 / f


def _vertex(t, y, tc, half, t_lo, t_hi):
    """Re-centred quadratic vertex near ``tc``; None if the window leaves the record."""
    for _ in range(4):
        if tc - half < t_lo or tc + half > t_hi:
            return None
        sel = np.abs(t - tc) <= half
        if sel.sum() < 5:
            return tc
        u = t[sel] - tc
        a, b, _c = np.polyfit(u, y[sel], 2)
        if a == 0:
            return tc
        step = -b / (2 * a)
        if abs(step) > half:
            return tc
        tc = tc + step
        if abs(step) < 1e-9:
            break
    return tc


def reversal_events(t: np.ndarray, angle: np.ndarray, calibration, period_s: float,
                    smooth_fraction: float = SMOOTH_FRACTION,
                    fit_fraction: float = FIT_FRACTION) -> list[tuple[float, int]]:
    """Alternating ``(time, kind)`` stroke reversals; kind +1 = maximum, -1 = minimum."""
    dt = float(np.median(np.diff(t)))
    s = moving_average(angle, int(round(smooth_fraction * period_s / dt)))
    v = np.gradient(s, t)
    sign = np.sign(v)
    nz = np.flatnonzero(sign)
    if nz.size == 0:
        return []
    # carry the last non-zero sign through exact zeros
    sign = sign[nz[np.maximum(np.searchsorted(nz, np.arange(sign.size), "right") - 1, 0)]]
    flips = np.flatnonzero(sign[:-1] != sign[1:])
    lo, hi = calibration
    span = hi - lo
    cand = []
    for i in flips:
        kind = 1 if sign[i] > 0 else -1
        j = i if (s[i] - s[i + 1]) * kind >= 0 else i + 1
        if kind > 0 and s[j] > lo + UPPER_GATE * span:
            cand.append((j, kind))
        elif kind < 0 and s[j] < lo + LOWER_GATE * span:
            cand.append((j, kind))
    merged: list[tuple[int, int]] = []
    for j, kind in cand:
        if merged and merged[-1][1] == kind:
            if (s[j] - s[merged[-1][0]]) * kind > 0:
                merged[-1] = (j, kind)
        else:
            merged.append((j, kind))
    half = fit_fraction * period_s
    # only events at the record ends lose their fit window, so alternation survives
    out = []
    for j, kind in merged:
        tv = _vertex(t, angle, float(t[j]), half, float(t[0]), float(t[-1]))
        if tv is not None:
            out.append((tv, kind))
    return out


def cycles_from_events(events) -> list[FlapCycle]:
    cycles = []
    for k in range(len(events) - 2):
        (t0, k0), (t1, k1), (t2, k2) = events[k:k + 3]
        if k0 == 1 and k1 == -1 and k2 == 1 and t0 < t1 < t2:
            cycles.append(FlapCycle(len(cycles), t0, t1, t2))
    return cycles


def segment_cycles(angle: AngleRecord, period_s: float | None = None) -> list[FlapCycle]:
    """Full max -> min -> max cycles on the angle record's own clock.

    The downstroke runs from a maximum to the following minimum.  Reversals
    too close to either end of the record for a symmetric vertex fit are
    dropped, which discards the partial cycles there.
    """
    t = np.asarray(angle.t_s)
    if period_s is None:
        period_s = estimate_period(t, angle.angle_rad)
    if not period_s:
        raise NoCyclesFound("angle record shows no oscillation")
    cycles = cycles_from_events(reversal_events(t, angle.angle_rad, angle.calibration, period_s))
    if not cycles:
        raise NoCyclesFound("no complete max-min-max cycle in the angle record")
    return cycles
