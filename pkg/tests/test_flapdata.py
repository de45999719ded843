import dataclasses

import numpy as np
import pytest

from flapreg.errors import EmptyWindow, InsufficientCycles, NoCyclesFound, NoPeriodicity
from flapreg.flapdata import (AngleRecord, FlapCycle, ForceRecord, TrialInput, align,
                              cycle_metrics, load_manifest, read_angle_csv, read_force_csv,
                              segment_cycles, summarize, write_angle_csv, write_force_csv)
from flapreg.flapdata.metrics import pair_metrics
from flapreg.flapdata.records import dominant_frequency, moving_average, relative_ns
from flapreg.flapdata.summary import write_summary
from flapreg.flapdata.synth import (SynthParams, condition_params, downstroke_bump, generate,
                                    true_downstroke_starts, write_matrix)


def _angle(t, a, cal=(-1.0, 1.0)):
    return AngleRecord(t, a, cal, 1000.0)


def _trial(p, seed=0, **kw):
    force, angle, quiet = generate(p, seed)
    return TrialInput(kw.get("L", 29.33), p.frequency_hz, kw.get("k", 1), force, angle, quiet)


# -- records ----------------------------------------------------------------

def test_moving_average_is_zero_phase():
    x = np.zeros(101)
    x[50] = 1.0
    y = moving_average(x, 10)  # forced to 11
    assert np.flatnonzero(y).tolist() == list(range(45, 56))
    assert y[50] == pytest.approx(1 / 11)
    assert np.allclose(y[:50][::-1], y[51:])


def test_dominant_frequency_and_flat_signal():
    t = np.arange(0, 3, 1 / 7000)
    f, prom = dominant_frequency(t, np.sin(2 * np.pi * 4.0 * t), (1, 10))
    assert f == pytest.approx(4.0, abs=0.01) and prom > 10
    assert dominant_frequency(t, np.full_like(t, 3.0), (1, 10)) == (None, 0.0)


def test_relative_ns_is_integer_and_anchor_free():
    t = np.arange(10) / 7000
    assert np.array_equal(relative_ns(t, 0.0), relative_ns(t + 1e4, 1e4))


def test_record_validation():
    with pytest.raises(ValueError):
        ForceRecord(np.array([0.0, 1.0, 0.5]), np.zeros((3, 6)), 7000.0)
    with pytest.raises(ValueError):
        AngleRecord(np.arange(3.0), np.zeros(4))
    with pytest.raises(ValueError):
        AngleRecord(np.arange(3.0), np.zeros(3), (1.0, 0.0))


def test_csv_round_trip_is_exact(tmp_path):
    force, angle, _ = generate(SynthParams(n_cycles=2), 3)
    write_force_csv(tmp_path / "f.csv", force)
    write_angle_csv(tmp_path / "a.csv", angle)
    f2 = read_force_csv(tmp_path / "f.csv")
    a2 = read_angle_csv(tmp_path / "a.csv", angle.calibration)
    assert np.array_equal(f2.t_s, force.t_s) and np.array_equal(f2.channels, force.channels)
    assert np.array_equal(a2.angle_rad, angle.angle_rad)
    (tmp_path / "bad.csv").write_text("time,angle\n0,1\n")
    with pytest.raises(ValueError):
        read_angle_csv(tmp_path / "bad.csv")


# -- segmentation -------------------------------------------------------------

def test_pure_sinusoid_cycles_at_velocity_zeros():
    t = np.arange(0, 2.1 + 1e-9, 1e-3)
    cycles = segment_cycles(_angle(t, np.sin(2 * np.pi * 5 * t)))
    assert len(cycles) == 10
    for k, c in enumerate(cycles):
        assert abs(c.t_downstroke_start - (0.05 + 0.2 * k)) <= 1e-3
        assert abs(c.t_upstroke_start - (0.15 + 0.2 * k)) <= 1e-3
    # boundaries partition the record: each cycle ends where the next begins
    for a, b in zip(cycles, cycles[1:]):
        assert a.t_end == b.t_downstroke_start


def test_noisy_sinusoid_same_count_small_jitter():
    t = np.arange(0, 2.1 + 1e-9, 1e-3)
    clean = np.sin(2 * np.pi * 5 * t)
    sigma = np.sqrt(0.5 / 10 ** (20 / 10))  # 20 dB SNR
    rng = np.random.default_rng(11)
    ref = segment_cycles(_angle(t, clean))
    for _ in range(5):
        noisy = segment_cycles(_angle(t, clean + rng.normal(0, sigma, t.size)))
        assert len(noisy) == len(ref)
        for a, b in zip(ref, noisy):
            assert abs(a.t_downstroke_start - b.t_downstroke_start) <= 2e-3
            assert abs(a.t_upstroke_start - b.t_upstroke_start) <= 2e-3


def test_ramp_has_no_cycles():
    t = np.arange(0, 2, 1e-3)
    with pytest.raises(NoCyclesFound):
        segment_cycles(_angle(t, t - 1.0))


# -- cycle metrics ------------------------------------------------------------

CYCLE = FlapCycle(0, 1.0, 1.1, 1.2)
T = 0.9 + np.arange(int(0.4 * 7000)) / 7000


def _spike_at(*times, height=1.0):
    y = np.zeros_like(T)
    for s in times:
        y[np.argmin(np.abs(T - s))] = height
    return y


def test_spike_timing_fraction():
    m = cycle_metrics(T, _spike_at(1.023), CYCLE)
    assert m.peak_timing_fraction == pytest.approx(0.23, abs=0.01)
    assert m.peak_lift_N == 1.0 and not m.ambiguous and not m.peak_in_upstroke


def test_spike_at_downstroke_start():
    assert cycle_metrics(T, _spike_at(1.0), CYCLE).peak_timing_fraction == 0.0


def test_equal_spikes_resolve_to_earliest_and_flag():
    m = cycle_metrics(T, _spike_at(1.03, 1.07), CYCLE)
    assert m.peak_timing_fraction == pytest.approx(0.3, abs=1e-3)
    assert m.ambiguous


def test_upstroke_peak_is_flagged_and_clamped():
    y = _spike_at(1.02, height=0.5) + _spike_at(1.15, height=2.0)
    m = cycle_metrics(T, y, CYCLE)
    assert m.peak_lift_N == 0.5
    assert m.peak_in_upstroke and m.cycle_peak_fraction == 1.0 and m.cycle_peak_lift_N == 2.0


def test_cycle_outside_record_is_empty():
    with pytest.raises(EmptyWindow):
        cycle_metrics(T, np.zeros_like(T), FlapCycle(0, 5.0, 5.1, 5.2))


# -- alignment ----------------------------------------------------------------

def test_self_alignment_within_one_sample():
    p = SynthParams(offset_s=0.0)
    force, angle, quiet = generate(p, 1)
    pair = align(force, angle, quiet_window_s=quiet)
    assert abs(pair.offset_s) <= 1 / p.force_rate_hz
    assert pair.uncertainty_s == (0.001, 0.002)


@pytest.mark.parametrize("seed", range(4))
def test_four_hz_offset_recovered(seed):
    p = condition_params(29.33, 4.0, offset_s=0.05)
    force, angle, quiet = generate(p, seed)
    pair = align(force, angle, quiet_window_s=quiet)
    assert abs(pair.offset_s - 0.05) <= 0.002
    starts = true_downstroke_starts(p)
    got = np.array([c.t_downstroke_start for c in pair.cycles])
    assert np.min(np.abs(got[:, None] - starts[None, :]), axis=1).max() <= 0.002


def test_constant_force_has_no_periodicity():
    force, angle, quiet = generate(SynthParams(), 0)
    flat = ForceRecord(force.t_s, np.ones_like(force.channels), force.nominal_rate_hz)
    with pytest.raises(NoPeriodicity):
        align(flat, angle, quiet_window_s=quiet)


def test_short_record_rejected():
    force, angle, quiet = generate(SynthParams(), 0)
    keep = slice(0, 350)  # 0.35 s of encoder data, under two 5 Hz periods
    short = AngleRecord(angle.t_s[keep], angle.angle_rad[keep], angle.calibration, 1000.0)
    with pytest.raises(InsufficientCycles):
        align(force, short, quiet_window_s=quiet)


def test_shared_clock_shift_is_bit_identical():
    p = SynthParams(frequency_hz=4.0)
    force, angle, quiet = generate(p, 5)
    dt = 1234.0
    moved_f = ForceRecord(force.t_s + dt, force.channels, force.nominal_rate_hz)
    moved_a = AngleRecord(angle.t_s + dt, angle.angle_rad, angle.calibration, 1000.0)
    a = pair_metrics(align(force, angle, quiet_window_s=quiet))
    b = pair_metrics(align(moved_f, moved_a, quiet_window_s=(quiet[0] + dt, quiet[1] + dt)))
    assert a == b


def test_doubling_rates_keeps_metrics():
    p = condition_params(30.08, 5.0)
    fine = dataclasses.replace(p, force_rate_hz=14000.0, angle_rate_hz=2000.0)
    r1 = summarize([_trial(p, 2)])[0].trials[0]
    r2 = summarize([_trial(fine, 2)])[0].trials[0]
    assert abs(r1.mean_peak_lift_N - r2.mean_peak_lift_N) <= 0.03 * r1.mean_peak_lift_N
    assert abs(r1.mean_peak_timing - r2.mean_peak_timing) <= 0.02
    assert abs(r1.offset_s - r2.offset_s) <= 0.002


def test_bump_shape():
    u = np.linspace(0, 1, 100001)
    for peak in (0.23, 0.4):
        y = downstroke_bump(u, peak)
        assert y[0] == pytest.approx(0, abs=1e-12) and y[-1] == pytest.approx(0, abs=1e-12)
        assert u[np.argmax(y)] == pytest.approx(peak, abs=1e-4) and y.max() == pytest.approx(1)


# -- summary ------------------------------------------------------------------

def test_identical_trials_collapse_aggregates():
    p = condition_params(28.58, 3.0)
    item = _trial(p, 9)
    (s,) = summarize([item, dataclasses.replace(item, trial=2), dataclasses.replace(item, trial=3)])
    assert s.peak_lift_min == s.peak_lift_max == pytest.approx(s.peak_lift_mean, rel=1e-15)
    assert s.peak_timing_min == s.peak_timing_max
    assert s.peak_ratio == 1.0 and s.timing_shift == 0.0


def test_corrupt_trial_is_flagged_not_dropped():
    p = condition_params(29.33, 5.0)
    good = _trial(p, 1)
    t = good.angle.t_s
    ramp = AngleRecord(t, np.linspace(-0.5, 0.5, t.size), (-0.55, 0.55), 1000.0)
    bad = TrialInput(29.33, 5.0, 2, good.force, ramp, good.quiet_window_s)
    (s,) = summarize([good, bad])
    assert len(s.trials) == 2 and s.n_failed == 1
    failed = s.trials[1]
    assert failed.failed and failed.error_code in ("NoCyclesFound", "InsufficientCycles")
    assert "L=29.33" in failed.error and "trial=2" in failed.error
    assert s.peak_lift_mean == pytest.approx(s.trials[0].mean_peak_lift_N)


def test_summary_order_and_threads_independent():
    items = [_trial(condition_params(L, f), 4, L=L) for f in (5.0, 3.0) for L in (30.08, 28.58)]
    a = summarize(items, threads=1)
    b = summarize(items[::-1], threads=3)
    assert [(s.frequency_hz, s.r1_length_mm) for s in a] == [(3.0, 28.58), (3.0, 30.08),
                                                            (5.0, 28.58), (5.0, 30.08)]
    assert [s.to_dict() for s in a] == [s.to_dict() for s in b]


def test_manifest_round_trip(tmp_path):
    manifest = write_matrix(tmp_path / "m", seed=0, n_cycles=6)
    items = load_manifest(manifest)
    assert len(items) == 27
    assert items[0].angle.calibration == (-0.55, 0.55)
    out = summarize(items[:3])
    paths = write_summary(out, tmp_path / "o")
    assert [p.name for p in paths] == ["summary.json", "cycles.csv"]
    (tmp_path / "x.json").write_text('[{"r1_length_mm": 1, "bogus": 2}]')
    with pytest.raises(ValueError, match="unknown keys"):
        load_manifest(tmp_path / "x.json")
