"""Raw diabetes event streams to uniformly sampled model inputs.

Times are minutes relative to a reference instant. Insulin and carbohydrate
records become piecewise-constant rate functions that are averaged exactly
over each 5-minute bin; heart rate and step count are averaged over a
forward-looking window at each grid stamp.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .dataset import Dataset

BOLUS_RATE = 1.5  # U/min
CARB_RATE = 45000.0  # mg/min
CARB_GRAMS_PER_MIN = CARB_RATE / 1000.0
GRID_STEP = 5.0  # min
N_STAMPS = 54
N_PAST = 42
VITALS_WINDOW = 5.0  # min

STREAMS = ("basal", "bolus", "carbs", "heart_rate", "steps", "cgm")
INPUT_CHANNELS = ("insulin", "carbs", "heart_rate", "steps")
OBS_CHANNEL = "Gs"


@dataclass
class EventStream:
    """Per-stream lists of (time in minutes, value), each sorted by time."""

    basal: list = field(default_factory=list)  # U/hour, rate from that time on
    bolus: list = field(default_factory=list)  # U
    carbs: list = field(default_factory=list)  # g
    heart_rate: list = field(default_factory=list)  # beats/min
    steps: list = field(default_factory=list)  # count
    cgm: list = field(default_factory=list)  # mg/dL

    def __post_init__(self):
        for name in STREAMS:
            pairs = [(float(t), float(v)) for t, v in getattr(self, name)]
            setattr(self, name, sorted(pairs, key=lambda p: p[0]))

    @classmethod
    def from_csv(cls, text: str, reference: str | datetime | None = None) -> "EventStream":
        """Parse ``stream,time,value`` rows (ISO-8601 times, optional header).

        Times become minutes after ``reference``; by default the first CGM stamp.
        """
        rows = []
        for rec in csv.reader(io.StringIO(text)):
            if not rec or not "".join(rec).strip():
                continue
            if rec[0].strip() == "stream":
                continue
            if len(rec) != 3:
                raise ValueError(f"expected 3 columns (stream, time, value), got {rec}")
            name, stamp, value = (r.strip() for r in rec)
            if name not in STREAMS:
                raise ValueError(f"unknown stream {name!r}; expected one of {STREAMS}")
            rows.append((name, datetime.fromisoformat(stamp), float(value)))
        if reference is None:
            cgm_times = [t for n, t, _ in rows if n == "cgm"]
            if not cgm_times:
                raise ValueError("no CGM rows to anchor the time axis")
            ref = min(cgm_times)
        else:
            ref = datetime.fromisoformat(reference) if isinstance(reference, str) else reference
        out = {n: [] for n in STREAMS}
        for name, stamp, value in rows:
            out[name].append(((stamp - ref).total_seconds() / 60.0, value))
        return cls(**out)


def _check_nonneg(events, what):
    for t, v in events:
        if v < 0:
            raise ValueError(f"negative {what} {v} at t={t}")


def merge_bolus(events) -> list[tuple[float, float]]:
    """Fold doses that start before the previous one has finished delivering.

    A dose b starting at t occupies [t, t + b/1.5). While the next dose starts
    inside the current window it is added to the current dose, which lengthens
    the window. Total insulin is unchanged.
    """
    events = [(float(t), float(b)) for t, b in events]
    _check_nonneg(events, "bolus dose")
    if any(events[i + 1][0] < events[i][0] for i in range(len(events) - 1)):
        raise ValueError("bolus events must be sorted by time")
    out = []
    i = 0
    while i < len(events):
        t, b = events[i]
        j = i + 1
        while j < len(events) and events[j][0] < t + b / BOLUS_RATE:
            b += events[j][1]
            j += 1
        out.append((t, b))
        i = j
    return out


def _overlap(a0, a1, b0, b1) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def basal_rate(basal, t: float) -> float:
    """Basal delivery in U/min at ``t``: the latest entry at or before t, 0 before the first."""
    rate = 0.0
    for ta, a in basal:
        if ta <= t:
            rate = a / 60.0
        else:
            break
    return rate


def bolus_rate(bolus, t: float) -> float:
    """1.5 U/min inside a merged dose's delivery window, else 0."""
    return sum(BOLUS_RATE for tb, b in bolus if tb <= t < tb + b / BOLUS_RATE)


def insulin_rate(basal, bolus, t: float) -> float:
    return basal_rate(basal, t) + bolus_rate(merge_bolus(bolus), t)


def insulin_integral(basal, bolus, t0: float, t1: float) -> float:
    """Exact integral of basal + merged bolus delivery over [t0, t1] in U."""
    _check_nonneg(basal, "basal rate")
    total = 0.0
    for k, (ta, a) in enumerate(basal):
        end = basal[k + 1][0] if k + 1 < len(basal) else np.inf
        total += a / 60.0 * _overlap(ta, end, t0, t1)
    for tb, b in merge_bolus(bolus):
        total += BOLUS_RATE * _overlap(tb, tb + b / BOLUS_RATE, t0, t1)
    return total


def carb_rate(carbs, t: float) -> float:
    """45000 mg/min for every meal active at t; a meal of m g is active on [t_m, t_m + m/45]."""
    return CARB_RATE * sum(1 for tm, m in carbs if tm <= t <= tm + m / CARB_GRAMS_PER_MIN)


def carb_integral(carbs, t0: float, t1: float) -> float:
    """Exact integral of the carbohydrate rate over [t0, t1] in mg."""
    for _, m in carbs:
        if m <= 0:
            raise ValueError(f"meal size must be positive, got {m}")
    return CARB_RATE * sum(_overlap(tm, tm + m / CARB_GRAMS_PER_MIN, t0, t1) for tm, m in carbs)


def bin_averages(integral, grid, step: float = GRID_STEP) -> np.ndarray:
    """Average rate over [t_i, t_i + step] for each grid stamp."""
    return np.array([integral(t, t + step) / step for t in grid])


def window_mean(samples, grid, width: float = VITALS_WINDOW) -> tuple[np.ndarray, np.ndarray]:
    """Mean of samples with t <= t_s <= t + width at each stamp.

    An empty window takes the sample nearest to t (earlier one on ties) and is
    flagged. Returns (values, flags); with no samples at all the values are 0.
    """
    times = np.array([t for t, _ in samples], dtype=np.float64)
    vals = np.array([v for _, v in samples], dtype=np.float64)
    out = np.zeros(len(grid))
    flags = np.zeros(len(grid), dtype=bool)
    for i, t in enumerate(grid):
        inside = (times >= t) & (times <= t + width)
        if inside.any():
            out[i] = vals[inside].mean()
        else:
            flags[i] = True
            if times.size:
                out[i] = vals[int(np.argmin(np.abs(times - t)))]
    return out, flags


@dataclass
class Discretized:
    times: np.ndarray  # (54,) grid stamps in minutes
    series: np.ndarray  # (54, 5): G, insulin, carbs, heart rate, steps
    vitals_filled: np.ndarray  # (54, 2) True where a vitals window was empty

    def to_dataset(self, meta: dict | None = None) -> Dataset:
        return series_to_dataset(self.series[None], meta)


def cgm_grid(cgm, n: int = N_STAMPS, step: float = GRID_STEP, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """The last ``n`` CGM stamps; they must be ``step`` minutes apart without gaps."""
    if len(cgm) < n:
        raise ValueError(f"need {n} CGM readings, got {len(cgm)}")
    sel = cgm[-n:]
    t = np.array([s for s, _ in sel])
    if np.any(np.abs(np.diff(t) - step) > tol):
        raise ValueError("CGM readings have a gap or irregular spacing in the window")
    return t, np.array([g for _, g in sel])


def discretize(stream: EventStream, n: int = N_STAMPS) -> Discretized:
    """Sample every feature on the CGM time grid."""
    t, g = cgm_grid(stream.cgm, n)
    ins = bin_averages(lambda a, b: insulin_integral(stream.basal, stream.bolus, a, b), t)
    carbs = bin_averages(lambda a, b: carb_integral(stream.carbs, a, b), t)
    hr, hr_flag = window_mean(stream.heart_rate, t)
    st, st_flag = window_mean(stream.steps, t)
    series = np.stack([g, ins, carbs, hr, st], axis=1)
    return Discretized(t, series, np.stack([hr_flag, st_flag], axis=1))


def series_to_dataset(series: np.ndarray, meta: dict | None = None, n_past: int = N_PAST,
                      input_names=INPUT_CHANNELS) -> Dataset:
    """Window (N, 54, 1 + m) series into 42 history stamps and 12 forecast stamps.

    t0 is the last history stamp; inputs at stamps t0..t_{q-1} drive the
    forecast of stamps t1..tq.
    """
    series = np.asarray(series, dtype=np.float64)
    N, T, F = series.shape
    if F != 1 + len(input_names):
        raise ValueError(f"series has {F} features, expected {1 + len(input_names)}")
    if not 1 <= n_past < T:
        raise ValueError("history must leave at least one forecast stamp")
    obs, x = series[:, :, :1], series[:, :, 1:]
    p = n_past - 1
    return Dataset(obs[:, :n_past], x[:, :p], x[:, p:T - 1], obs[:, n_past:], [OBS_CHANNEL], list(input_names),
                   dict(meta or {}))
