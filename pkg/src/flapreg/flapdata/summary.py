"""Trial reduction and per-condition aggregation over a test matrix."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FlapregError
from .align import align
from .metrics import CycleMetrics, pair_metrics
from .records import AngleRecord, ForceRecord, read_angle_csv, read_force_csv

_MANIFEST_KEYS = {"r1_length_mm", "frequency_hz", "trial", "force_csv", "angle_csv",
                  "quiet_window_s", "calibration_rad"}


@dataclass(frozen=True, eq=False)
class TrialInput:
    r1_length_mm: float
    frequency_hz: float
    trial: int
    force: ForceRecord
    angle: AngleRecord
    quiet_window_s: tuple[float, float] | None = None


@dataclass(frozen=True)
class TrialResult:
    r1_length_mm: float
    frequency_hz: float
    trial: int
    cycles: tuple[CycleMetrics, ...] = ()
    offset_s: float | None = None
    residual_s: float | None = None
    error_code: str | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error_code is not None

    @property
    def mean_peak_lift_N(self) -> float:
        return float(np.mean([c.peak_lift_N for c in self.cycles])) if self.cycles else math.nan

    @property
    def mean_peak_timing(self) -> float:
        return (float(np.mean([c.peak_timing_fraction for c in self.cycles]))
                if self.cycles else math.nan)


@dataclass(frozen=True)
class ConditionSummary:
    r1_length_mm: float
    frequency_hz: float
    trials: tuple[TrialResult, ...]
    peak_lift_mean: float | None
    peak_lift_min: float | None
    peak_lift_max: float | None
    peak_timing_mean: float | None
    peak_timing_min: float | None
    peak_timing_max: float | None
    # against the shortest length at the same frequency
    peak_ratio: float | None = None
    timing_shift: float | None = None
    n_failed: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "r1_length_mm": self.r1_length_mm, "frequency_hz": self.frequency_hz,
            "n_trials": len(self.trials), "n_failed": self.n_failed,
            "peak_lift_N": {"mean": self.peak_lift_mean, "min": self.peak_lift_min,
                            "max": self.peak_lift_max},
            "peak_timing_fraction": {"mean": self.peak_timing_mean, "min": self.peak_timing_min,
                                     "max": self.peak_timing_max},
            "peak_ratio_vs_shortest": self.peak_ratio,
            "timing_shift_vs_shortest": self.timing_shift,
            "trials": [{"trial": t.trial, "n_cycles": len(t.cycles), "offset_s": t.offset_s,
                        "residual_s": t.residual_s, "mean_peak_lift_N": _num(t.mean_peak_lift_N),
                        "mean_peak_timing": _num(t.mean_peak_timing),
                        "error_code": t.error_code, "error": t.error} for t in self.trials],
        }


def _num(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def reduce_trial(item: TrialInput, axis: str = "fz") -> TrialResult:
    """Align, segment and measure one trial; domain failures are captured, not raised."""
    key = (item.r1_length_mm, item.frequency_hz, item.trial)
    try:
        pair = align(item.force, item.angle, axis, item.quiet_window_s)
        metrics = tuple(pair_metrics(pair))
    except FlapregError as exc:
        return TrialResult(*key, error_code=exc.code,
                           error=f"L={item.r1_length_mm} f={item.frequency_hz} "
                                 f"trial={item.trial}: {exc}")
    return TrialResult(*key, cycles=metrics, offset_s=pair.offset_s, residual_s=pair.residual_s)


def _stats(values):
    if not values:
        return None, None, None
    return float(np.mean(values)), float(min(values)), float(max(values))


def summarize(matrix, axis: str = "fz", threads: int = 1) -> list[ConditionSummary]:
    """Aggregate trials per (length, frequency) condition.

    ``matrix`` holds :class:`TrialInput` items.  Aggregates are taken over
    the per-trial mean values of successful trials.  Output is ordered by
    frequency, then length, whatever the input order or thread count.
    """
    items = list(matrix)
    if threads == 1 or len(items) < 2:
        results = [reduce_trial(it, axis) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            results = list(pool.map(lambda it: reduce_trial(it, axis), items))
    groups: dict[tuple[float, float], list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.frequency_hz, r.r1_length_mm), []).append(r)
    out = []
    for (f, L) in sorted(groups):
        trials = tuple(sorted(groups[(f, L)], key=lambda r: r.trial))
        ok = [t for t in trials if not t.failed and t.cycles]
        pk = _stats([t.mean_peak_lift_N for t in ok])
        tm = _stats([t.mean_peak_timing for t in ok])
        out.append(ConditionSummary(L, f, trials, *pk, *tm,
                                    n_failed=sum(1 for t in trials if t.failed)))
    final = []
    for s in out:
        ref = min((c for c in out if c.frequency_hz == s.frequency_hz),
                  key=lambda c: c.r1_length_mm)
        ratio = shift = None
        if s.peak_lift_mean is not None and ref.peak_lift_mean:
            ratio = s.peak_lift_mean / ref.peak_lift_mean
            shift = s.peak_timing_mean - ref.peak_timing_mean
        final.append(ConditionSummary(**{**s.__dict__, "peak_ratio": ratio,
                                         "timing_shift": shift}))
    return final


def load_manifest(path) -> list[TrialInput]:
    """Read a condition manifest; CSV paths are relative to the manifest file."""
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, list) or not doc:
        raise ValueError(f"{path}: manifest must be a non-empty JSON array")
    items = []
    for i, e in enumerate(doc):
        extra = set(e) - _MANIFEST_KEYS
        if extra:
            raise ValueError(f"{path}: entry {i} has unknown keys {sorted(extra)}")
        cal = e.get("calibration_rad")
        qw = e.get("quiet_window_s")
        items.append(TrialInput(
            float(e["r1_length_mm"]), float(e["frequency_hz"]), int(e["trial"]),
            read_force_csv(path.parent / e["force_csv"]),
            read_angle_csv(path.parent / e["angle_csv"], tuple(cal) if cal else None),
            tuple(qw) if qw else None))
    return items


def write_summary(summaries, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sj = out / "summary.json"
    sj.write_text(json.dumps([s.to_dict() for s in summaries], indent=2) + "\n",
                  encoding="utf-8")
    cc = out / "cycles.csv"
    with open(cc, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r1_length_mm", "frequency_hz", "trial", "cycle_index", "peak_lift_N",
                    "peak_timing_fraction", "mean_lift_N", "duration_s",
                    "cycle_peak_lift_N", "peak_in_upstroke", "ambiguous"])
        for s in summaries:
            for t in s.trials:
                for c in t.cycles:
                    w.writerow([repr(s.r1_length_mm), repr(s.frequency_hz), t.trial, c.index,
                                repr(c.peak_lift_N), repr(c.peak_timing_fraction),
                                repr(c.mean_lift_N), repr(c.cycle_duration_s),
                                repr(c.cycle_peak_lift_N), int(c.peak_in_upstroke),
                                int(c.ambiguous)])
    return [sj, cc]
