"""Per-cycle lift metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyWindow
from .segment import FlapCycle


@dataclass(frozen=True)
class CycleMetrics:
    """Lift figures for one cycle.

    ``peak_lift_N`` and ``peak_timing_fraction`` come from the downstroke
    window.  The whole-cycle maximum is kept alongside; when it falls in the
    upstroke its fraction is clamped to 1 and ``peak_in_upstroke`` is set.
    """

    index: int
    peak_lift_N: float
    peak_timing_fraction: float
    mean_lift_N: float
    cycle_duration_s: float
    cycle_peak_lift_N: float
    cycle_peak_fraction: float
    peak_in_upstroke: bool
    ambiguous: bool


def _argmax_earliest(x: np.ndarray) -> tuple[int, bool]:
    k = int(np.argmax(x))  # numpy returns the first of tied maxima
    return k, bool(np.count_nonzero(x == x[k]) > 1)


def cycle_metrics(t_s: np.ndarray, lift_N: np.ndarray, cycle: FlapCycle,
                  peak_signal: np.ndarray | None = None) -> CycleMetrics:
    """Metrics of ``cycle`` from a baseline-free lift trace on the aligned timebase.

    ``peak_signal`` (same shape as ``lift_N``) is searched for the peak when
    given, typically a lightly smoothed copy of the lift; the mean always
    uses the raw lift.  Equal maxima resolve to the earliest, flagged.
    """
    t = np.asarray(t_s)
    lift = np.asarray(lift_N)
    peaks = lift if peak_signal is None else np.asarray(peak_signal)
    d0, u0, e0 = cycle.t_downstroke_start, cycle.t_upstroke_start, cycle.t_end
    i0, iu, ie = np.searchsorted(t, [d0, u0, e0], side="left")
    if iu <= i0:
        raise EmptyWindow(f"cycle {cycle.index}: no force samples in the downstroke")
    if ie <= i0:
        raise EmptyWindow(f"cycle {cycle.index}: no force samples in the cycle")
    down = peaks[i0:iu]
    k, tie = _argmax_earliest(down)
    span = u0 - d0
    frac = min(max((t[i0 + k] - d0) / span, 0.0), 1.0)
    whole = peaks[i0:ie]
    kc, tie_c = _argmax_earliest(whole)
    in_up = i0 + kc >= iu
    cfrac = 1.0 if in_up else min(max((t[i0 + kc] - d0) / span, 0.0), 1.0)
    return CycleMetrics(cycle.index, float(down[k]), float(frac),
                        float(np.mean(lift[i0:ie])), float(cycle.duration_s),
                        float(whole[kc]), float(cfrac), bool(in_up), tie or tie_c)


def pair_metrics(pair) -> list[CycleMetrics]:
    """Metrics of every cycle of an aligned record pair."""
    return [cycle_metrics(pair.t_force_s, pair.lift_N, c, pair.lift_smooth_N)
            for c in pair.cycles]
