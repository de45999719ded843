"""Sensor record types, CSV I/O and the shared signal helpers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORCE_COLUMNS = ("t_s", "fx_N", "fy_N", "fz_N", "tx_Nmm", "ty_Nmm", "tz_Nmm")
ANGLE_COLUMNS = ("t_s", "angle_rad")
_AXES = {"fx": 0, "fy": 1, "fz": 2, "tx": 3, "ty": 4, "tz": 5}


def _check_time(t: np.ndarray, what: str):
    if t.ndim != 1 or t.size < 2:
        raise ValueError(f"{what} needs at least 2 samples")
    if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise ValueError(f"{what} timestamps must be finite and strictly increasing")


@dataclass(frozen=True, eq=False)
class ForceRecord:
    """Six-axis load cell log: forces in N, torques in N*mm."""

    t_s: np.ndarray
    channels: np.ndarray  # shape (n, 6): fx fy fz tx ty tz
    nominal_rate_hz: float = 7000.0

    def __post_init__(self):
        t = np.asarray(self.t_s, dtype=float)
        ch = np.asarray(self.channels, dtype=float)
        _check_time(t, "force record")
        if ch.shape != (t.size, 6):
            raise ValueError(f"channels must have shape ({t.size}, 6), got {ch.shape}")
        t.flags.writeable = False
        ch.flags.writeable = False
        object.__setattr__(self, "t_s", t)
        object.__setattr__(self, "channels", ch)

    def axis(self, name: str = "fz") -> np.ndarray:
        if name not in _AXES:
            raise ValueError(f"unknown axis {name!r}; choose from {sorted(_AXES)}")
        return self.channels[:, _AXES[name]]

    @property
    def duration_s(self) -> float:
        return float(self.t_s[-1] - self.t_s[0])


@dataclass(frozen=True, eq=False)
class AngleRecord:
    """Shoulder encoder log with the range-of-motion calibration (rad)."""

    t_s: np.ndarray
    angle_rad: np.ndarray
    calibration: tuple[float, float] | None = None
    nominal_rate_hz: float = field(default=1000.0)

    def __post_init__(self):
        t = np.asarray(self.t_s, dtype=float)
        a = np.asarray(self.angle_rad, dtype=float)
        _check_time(t, "angle record")
        if a.shape != t.shape:
            raise ValueError("angle and time arrays differ in length")
        t.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "t_s", t)
        object.__setattr__(self, "angle_rad", a)
        cal = self.calibration
        if cal is None:
            # no stored sweep: fall back to a robust range of the record itself
            cal = (float(np.percentile(a, 0.5)), float(np.percentile(a, 99.5)))
        cal = (float(cal[0]), float(cal[1]))
        if not cal[0] < cal[1]:
            raise ValueError("calibration needs min < max")
        object.__setattr__(self, "calibration", cal)

    def shifted(self, offset_s: float) -> "AngleRecord":
        return AngleRecord(self.t_s - offset_s, self.angle_rad, self.calibration,
                           self.nominal_rate_hz)


def relative_ns(t: np.ndarray, origin: float) -> np.ndarray:
    """Times relative to ``origin`` as integer nanoseconds.

    Quantizing makes every downstream result independent of where the two
    clocks are anchored, down to the last bit.
    """
    return np.rint((np.asarray(t, dtype=float) - origin) * 1e9).astype(np.int64)


def ns_to_s(ns) -> np.ndarray:
    return np.asarray(ns, dtype=np.int64) / 1e9


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered (zero-phase) boxcar average; ``window`` is forced odd, edges held."""
    w = max(1, int(window))
    if w % 2 == 0:
        w += 1
    if w == 1 or x.size < 2:
        return np.array(x, dtype=float)
    pad = w // 2
    xp = np.pad(np.asarray(x, dtype=float), pad, mode="edge")
    return np.convolve(xp, np.full(w, 1.0 / w), mode="valid")


def dominant_frequency(t: np.ndarray, x: np.ndarray, band=(0.5, 50.0)):
    """Strongest spectral line of ``x`` inside ``band`` (Hz).

    Returns ``(frequency_hz, prominence)`` where prominence is the peak
    magnitude over the band's median magnitude; ``(None, 0.0)`` when the
    signal is flat or the band holds no bins.
    """
    x = np.asarray(x, dtype=float) - np.mean(x)
    if not np.any(np.abs(x) > 1e-12 * max(1.0, float(np.max(np.abs(x))))):
        return None, 0.0
    dt = float(np.median(np.diff(t)))
    nfft = 1 << int(np.ceil(np.log2(8 * x.size)))
    mag = np.abs(np.fft.rfft(x * np.hanning(x.size), nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    sel = np.flatnonzero((freqs >= band[0]) & (freqs <= band[1]))
    if sel.size < 3:
        return None, 0.0
    k = sel[np.argmax(mag[sel])]
    med = float(np.median(mag[sel]))
    prom = float(mag[k] / med) if med > 0 else float("inf")
    if 0 < k < mag.size - 1:
        a, b, c = np.log(mag[k - 1:k + 2] + 1e-300)
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den != 0 else 0.0
    else:
        shift = 0.0
    return float((k + shift) * (freqs[1] - freqs[0])), prom


def baseline(force: ForceRecord, axis: str = "fz", quiet_window_s=None) -> float:
    """Offset to remove from ``axis``: quiet-window mean, else whole-record median."""
    x = force.axis(axis)
    if quiet_window_s is not None:
        t0, t1 = quiet_window_s
        origin = float(force.t_s[0])
        rel = relative_ns(force.t_s, origin)
        lo, hi = relative_ns(np.array([t0, t1]), origin)
        sel = (rel >= lo) & (rel <= hi)
        if np.any(sel):
            return float(np.mean(x[sel]))
    return float(np.median(x))


def _read(path, columns):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header is None or tuple(h.strip() for h in header) != columns:
        raise ValueError(f"{path}: expected header {','.join(columns)}, got {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(columns):
        raise ValueError(f"{path}: expected {len(columns)} columns")
    return data


def read_force_csv(path, nominal_rate_hz: float = 7000.0) -> ForceRecord:
    data = _read(path, FORCE_COLUMNS)
    return ForceRecord(data[:, 0], data[:, 1:], nominal_rate_hz)


def read_angle_csv(path, calibration=None, nominal_rate_hz: float = 1000.0) -> AngleRecord:
    data = _read(path, ANGLE_COLUMNS)
    return AngleRecord(data[:, 0], data[:, 1], calibration, nominal_rate_hz)


def _write(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_force_csv(path, rec: ForceRecord):
    _write(path, FORCE_COLUMNS, np.column_stack([rec.t_s, rec.channels]).tolist())


def write_angle_csv(path, rec: AngleRecord):
    _write(path, ANGLE_COLUMNS, np.column_stack([rec.t_s, rec.angle_rad]).tolist())
