"""Clock alignment of the shoulder encoder against the load cell.

The two streams are clocked independently.  Stroke reversals (angular
velocity sign inversions) are matched to zero crossings of the vertical
lift, which changes sign at each reversal: negative-to-positive entering the
downstroke and positive-to-negative entering the upstroke.  The clock offset
is the median time difference over matched pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientCycles, NoPeriodicity
from .records import (AngleRecord, ForceRecord, baseline, dominant_frequency, moving_average,
                      ns_to_s, relative_ns)
from .segment import FlapCycle, cycles_from_events, reversal_events

# Timing uncertainty of the bench synchronization procedure, seconds.
UNCERTAINTY_S = (0.001, 0.002)
FORCE_BAND_HZ = (1.0, 10.0)
MIN_PROMINENCE = 10.0
LIFT_SMOOTH_FRACTION = 0.01
CROSSING_FIT_FRACTION = 0.025
MATCH_TOLERANCE_FRACTION = 0.05


@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Both records on one timebase: seconds from the first force sample."""

    t_force_s: np.ndarray
    lift_N: np.ndarray
    lift_smooth_N: np.ndarray
    t_angle_s: np.ndarray
    angle_rad: np.ndarray
    offset_s: float          # angle clock minus force clock
    residual_s: float        # median |matched difference - offset|
    n_matched: int
    nominal_period_s: float
    baseline_N: float
    cycles: tuple[FlapCycle, ...]
    uncertainty_s: tuple[float, float] = UNCERTAINTY_S


def _side_ss(u, y, mask):
    """Residual sum of squares of a no-intercept quadratic fit per candidate row."""
    u = np.where(mask, u, 0.0)
    yy = np.where(mask, y, 0.0)
    s11, s12, s22 = (u * u).sum(1), (u ** 3).sum(1), (u ** 4).sum(1)
    b1, b2 = (u * yy).sum(1), (u * u * yy).sum(1)
    det = s11 * s22 - s12 * s12
    ok = det > 1e-30 * np.maximum(s11 * s22, 1e-300)
    c1 = np.where(ok, (b1 * s22 - b2 * s12) / np.where(ok, det, 1), 0)
    c2 = np.where(ok, (s11 * b2 - s12 * b1) / np.where(ok, det, 1), 0)
    return (yy * yy).sum(1) - c1 * b1 - c2 * b2


def _refine_crossing(t, y, j, half):
    """Sub-sample zero crossing near sample ``j`` by a hinged two-sided quadratic fit."""
    sel = np.flatnonzero(np.abs(t - t[j]) <= half)
    if sel.size < 8 or t[j] - half < t[0] or t[j] + half > t[-1]:
        return float(t[j])
    tw, yw = t[sel], y[sel]
    # the smoothed crossing can sit a few samples off the raw one on skewed slopes
    n = int(np.count_nonzero(np.abs(tw - t[j]) <= 0.5 * half))
    cands = np.linspace(t[j] - 0.5 * half, t[j] + 0.5 * half, 4 * n + 1)
    u = tw[None, :] - cands[:, None]
    yb = np.broadcast_to(yw, u.shape)
    ss = _side_ss(u, yb, u < 0) + _side_ss(u, yb, u >= 0)
    k = int(np.argmin(ss))
    tc = float(cands[k])
    if 0 < k < cands.size - 1:
        a, b, c = ss[k - 1:k + 2]
        den = a - 2 * b + c
        if den > 0:
            tc += 0.5 * (a - c) / den * float(cands[1] - cands[0])
    return tc


def lift_crossings(t, lift, smooth, period_s):
    """Rising and falling zero crossings of the lift, Schmitt-gated against noise."""
    pos = 0.3 * float(np.percentile(smooth, 99.5))
    neg = 0.3 * float(np.percentile(smooth, 0.5))
    if not (pos > 0 > neg):
        return np.array([]), np.array([])
    hi, lo = smooth > pos, smooth < neg
    ev = np.flatnonzero(hi | lo)
    labels = hi[ev]
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    half = CROSSING_FIT_FRACTION * period_s
    rising, falling = [], []
    for k in change:
        p, i = ev[k - 1], ev[k]
        seg = smooth[p:i + 1]
        flips = np.flatnonzero(np.signbit(seg[:-1]) != np.signbit(seg[1:]))
        j = p + (int(flips[-1]) if flips.size else (i - p) // 2)
        tc = _refine_crossing(t, lift, j, half)
        (rising if labels[k] else falling).append(tc)
    return np.array(rising), np.array(falling)


def _matches(ref, obs, tau, tol):
    """Differences ``ref - obs`` for each ref event whose shifted time has a partner."""
    out = []
    if obs.size == 0:
        return out
    for r in ref:
        k = int(np.argmin(np.abs(obs - (r - tau))))
        d = r - obs[k]
        if abs(d - tau) <= tol:
            out.append(d)
    return out


def estimate_offset(down, up, rising, falling, period_s, max_offset_s=None):
    """Offset maximizing matched reversal/crossing pairs, then their median difference."""
    lim = period_s / 2 if max_offset_s is None else max_offset_s
    tol = MATCH_TOLERANCE_FRACTION * period_s
    cands = []
    for ref, obs in ((down, rising), (up, falling)):
        if ref.size and obs.size:
            d = (ref[:, None] - obs[None, :]).ravel()
            cands.extend(d[np.abs(d) <= lim].tolist())
    if not cands:
        return None, [], tol
    best = None
    for c in sorted(set(cands)):
        score = len(_matches(down, rising, c, tol)) + len(_matches(up, falling, c, tol))
        key = (-score, abs(c), c)
        if best is None or key < best[0]:
            best = (key, c)
    tau = best[1]
    for _ in range(2):
        diffs = _matches(down, rising, tau, tol) + _matches(up, falling, tau, tol)
        tau = float(np.median(diffs))
    return tau, diffs, tol


def align(force: ForceRecord, angle: AngleRecord, axis: str = "fz", quiet_window_s=None,
          max_offset_s: float | None = None) -> AlignedPair:
    """Estimate the encoder clock offset and put both records on the force timebase.

    Raises
    ------
    NoPeriodicity
        The lift has no dominant line between 1 and 10 Hz.
    InsufficientCycles
        Either record spans fewer than two flap periods, or fewer than two
        cycles could be segmented or matched.
    """
    origin = float(force.t_s[0])
    tf = ns_to_s(relative_ns(force.t_s, origin))
    ta = ns_to_s(relative_ns(angle.t_s, origin))
    base = baseline(force, axis, quiet_window_s)
    lift = force.axis(axis) - base
    f0, prom = dominant_frequency(tf, lift, FORCE_BAND_HZ)
    if f0 is None or prom < MIN_PROMINENCE:
        raise NoPeriodicity(f"no lift fundamental in {FORCE_BAND_HZ[0]}-{FORCE_BAND_HZ[1]} Hz")
    period = 1.0 / f0
    for name, tt in (("force", tf), ("angle", ta)):
        if tt[-1] - tt[0] < 2 * period:
            raise InsufficientCycles(f"{name} record spans {tt[-1] - tt[0]:.4g} s, "
                                     f"fewer than two {period:.4g} s periods")
    events = reversal_events(ta, angle.angle_rad, angle.calibration, period)
    cycles = cycles_from_events(events)
    if len(cycles) < 2:
        raise InsufficientCycles(f"only {len(cycles)} complete cycle(s) in the angle record")
    dt = float(np.median(np.diff(tf)))
    smooth = moving_average(lift, int(round(LIFT_SMOOTH_FRACTION * period / dt)))
    rising, falling = lift_crossings(tf, lift, smooth, period)
    down = np.array([c.t_downstroke_start for c in cycles])
    up = np.array([c.t_upstroke_start for c in cycles])
    tau, diffs, _ = estimate_offset(down, up, rising, falling, period, max_offset_s)
    if tau is None or len(diffs) < 2:
        raise InsufficientCycles("fewer than two reversals matched a lift zero crossing")
    resid = float(np.median(np.abs(np.array(diffs) - tau)))
    moved = [c.shifted(tau) for c in cycles]
    inside = tuple(c for c in moved if c.t_downstroke_start >= tf[0] and c.t_end <= tf[-1])
    return AlignedPair(tf, lift, smooth, ta - tau, np.asarray(angle.angle_rad), tau, resid,
                       len(diffs), period, base, inside)
