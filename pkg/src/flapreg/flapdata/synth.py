"""Synthetic flap-test logs with known lift peaks, timing and clock offset.

The lift model per cycle is a smooth bump over the downstroke that peaks at
a chosen fraction ``p`` and returns to zero at both reversals, and
a smaller negative half-sine over the upstroke.  Peak amplitude scales with
frequency squared.  At 5 Hz the longest regulator length carries 1.37 times
the peak of the shortest and moves the peak from 23 % to 40 % of the
downstroke; at other frequencies both effects shrink in proportion to f / 5.

Run ``python -m flapreg.flapdata.synth OUTDIR`` to write a full 3 x 3 x 3
matrix of CSVs plus ``manifest.json``.
"""

from __future__ import annotations

import argparse
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import AngleRecord, ForceRecord, write_angle_csv, write_force_csv

LENGTHS_MM = (28.58, 29.33, 30.08)
FREQUENCIES_HZ = (3.0, 4.0, 5.0)
TRIALS = 3
PEAK_RATIO_5HZ = 1.37
TIMING_SHORT, TIMING_LONG = 0.23, 0.40


@dataclass(frozen=True)
class SynthParams:
    frequency_hz: float = 5.0
    peak_lift_N: float = 0.5
    peak_fraction: float = 0.23
    upstroke_ratio: float = 0.25
    offset_s: float = 0.05         # angle clock minus force clock
    force_rate_hz: float = 7000.0
    angle_rate_hz: float = 1000.0
    quiet_s: float = 0.5
    n_cycles: int = 10
    angle_mid_rad: float = 0.0
    angle_amp_rad: float = 0.55
    force_noise_N: float = 0.002
    angle_noise_rad: float = 0.001
    gravity_offset_N: float = -0.8
    start_s: float = 0.0


def condition_params(r1_length_mm: float, frequency_hz: float, **overrides) -> SynthParams:
    """Peak lift and timing encoded for one test condition."""
    lo, hi = LENGTHS_MM[0], LENGTHS_MM[-1]
    s = (r1_length_mm - lo) / (hi - lo) * (frequency_hz / 5.0)
    peak = 0.5 * (frequency_hz / 5.0) ** 2 * (1 + (PEAK_RATIO_5HZ - 1) * s)
    frac = TIMING_SHORT + (TIMING_LONG - TIMING_SHORT) * s
    return SynthParams(frequency_hz=frequency_hz, peak_lift_N=peak, peak_fraction=frac,
                       **overrides)


def _hermite(x, x0, x1, y0, y1, m0, m1):
    d = x1 - x0
    t = (x - x0) / d
    t2, t3 = t * t, t * t * t
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d * m0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d * m1)


def downstroke_bump(u: np.ndarray, peak: float, drop: float = 0.1) -> np.ndarray:
    """Unit bump on u in [0, 1], zero at both ends, maximum 1 at ``peak``.

    The top is a symmetric parabola falling by ``drop`` over a half-width
    ``h``; cubic Hermite flanks join it to the reversals with finite slopes.
    A symmetric top keeps the location of the maximum unbiased under noise
    and symmetric smoothing, whatever the skew of the flanks.
    """
    h = min(0.08, 0.5 * peak, 0.5 * (1 - peak))
    c = drop / (h * h)
    top = 1 - c * (u - peak) ** 2
    a, b = peak - h, peak + h
    left = _hermite(u, 0.0, a, 0.0, 1 - drop, (1 - drop) / a, 2 * c * h)
    right = _hermite(u, b, 1.0, 1 - drop, 0.0, -2 * c * h, -(1 - drop) / (1 - b))
    return np.where(u < a, left, np.where(u > b, right, top))


def lift_profile(t_true: np.ndarray, p: SynthParams) -> np.ndarray:
    """Noise-free lift at true times ``t_true``; zero before flapping starts."""
    phase = p.frequency_hz * (t_true - (p.start_s + p.quiet_s))
    cyc = np.mod(phase, 1.0)
    lift = np.zeros_like(t_true)
    up = cyc < 0.5
    u_up = 2 * cyc
    lift = np.where(up, -p.upstroke_ratio * p.peak_lift_N * np.sin(np.pi * u_up), lift)
    lift = np.where(~up, p.peak_lift_N * downstroke_bump(2 * cyc - 1, p.peak_fraction), lift)
    return np.where(phase >= 0, lift, 0.0)


def angle_profile(t_true: np.ndarray, p: SynthParams) -> np.ndarray:
    """Rest at the minimum, then a cosine: maxima start each downstroke."""
    phase = p.frequency_hz * (t_true - (p.start_s + p.quiet_s))
    a = p.angle_mid_rad - p.angle_amp_rad * np.cos(2 * np.pi * phase)
    return np.where(phase >= 0, a, p.angle_mid_rad - p.angle_amp_rad)


def true_downstroke_starts(p: SynthParams) -> np.ndarray:
    t_on = p.start_s + p.quiet_s
    return t_on + (np.arange(p.n_cycles + 1) + 0.5) / p.frequency_hz


def duration_s(p: SynthParams) -> float:
    return p.quiet_s + (p.n_cycles + 0.75) / p.frequency_hz


def generate(p: SynthParams, seed=0) -> tuple[ForceRecord, AngleRecord, tuple[float, float]]:
    """Force record, angle record and the quiet window (force clock)."""
    rng = np.random.default_rng(seed)
    total = duration_s(p)
    tf = p.start_s + np.arange(int(total * p.force_rate_hz) + 1) / p.force_rate_hz
    lift = lift_profile(tf, p)
    ch = rng.normal(0.0, p.force_noise_N, size=(tf.size, 6))
    ch[:, 2] += p.gravity_offset_N + lift
    ch[:, 0] += 0.2 * lift
    ch[:, 3:] *= 10.0  # torque channels in N*mm
    ta_true = p.start_s + np.arange(int(total * p.angle_rate_hz) + 1) / p.angle_rate_hz
    ang = angle_profile(ta_true, p) + rng.normal(0.0, p.angle_noise_rad, ta_true.size)
    cal = (p.angle_mid_rad - p.angle_amp_rad, p.angle_mid_rad + p.angle_amp_rad)
    force = ForceRecord(tf, ch, p.force_rate_hz)
    angle = AngleRecord(ta_true + p.offset_s, ang, cal, p.angle_rate_hz)
    quiet = (p.start_s + 0.1 * p.quiet_s, p.start_s + 0.9 * p.quiet_s)
    return force, angle, quiet


def trial_seed(base: int, r1_length_mm: float, frequency_hz: float, trial: int) -> list[int]:
    return [base, int(round(r1_length_mm * 100)), int(round(frequency_hz * 1000)), trial]


def generate_matrix(lengths=LENGTHS_MM, frequencies=FREQUENCIES_HZ, trials=TRIALS,
                    seed: int = 0, **overrides):
    """Yield ``(r1, f, trial, force, angle, quiet_window)`` for the full test matrix."""
    for f in frequencies:
        for L in lengths:
            for k in range(1, trials + 1):
                p = condition_params(L, f, **overrides)
                force, angle, quiet = generate(p, trial_seed(seed, L, f, k))
                yield L, f, k, force, angle, quiet


def write_matrix(out_dir, seed: int = 0, **overrides) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for L, f, k, force, angle, quiet in generate_matrix(seed=seed, **overrides):
        stem = f"L{L!r}_f{f!r}_t{k}"
        write_force_csv(out / f"{stem}_force.csv", force)
        write_angle_csv(out / f"{stem}_angle.csv", angle)
        entries.append({"r1_length_mm": L, "frequency_hz": f, "trial": k,
                        "force_csv": f"{stem}_force.csv", "angle_csv": f"{stem}_angle.csv",
                        "quiet_window_s": list(quiet),
                        "calibration_rad": list(angle.calibration)})
    path = out / "manifest.json"
    path.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    return path


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python -m flapreg.flapdata.synth",
                                 description="Write a synthetic 3x3x3 flap-test matrix.")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(write_matrix(args.out_dir, args.seed))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
