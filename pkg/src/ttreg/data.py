"""Data generation and ingestion: the delayed-feedback chaotic series,
random-teacher network data, lagged windows, splits, and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import NamedTuple

import numpy as np

from ttreg.mlp import Mlp

__all__ = [
    "Dataset",
    "mackey_glass",
    "teacher_mlp_data",
    "build_windows",
    "split_indices",
    "make_dataset",
    "CsvSeries",
    "ingest_csv",
    "write_series_csv",
]


@dataclass
class Dataset:
    """Windowed inputs/targets plus a fixed train/val/test index partition."""

    x: np.ndarray
    y: np.ndarray
    idx_train: np.ndarray
    idx_val: np.ndarray
    idx_test: np.ndarray

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        idx = getattr(self, f"idx_{name}")
        return self.x[idx], self.y[idx]


def _lagrange4(values: np.ndarray, s: float) -> float:
    """Cubic Lagrange interpolation on four consecutive unit-spaced nodes,
    evaluated at local coordinate s in [0, 3]."""
    w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0
    w1 = s * (s - 2.0) * (s - 3.0) / 2.0
    w2 = -s * (s - 1.0) * (s - 3.0) / 2.0
    w3 = s * (s - 1.0) * (s - 2.0) / 6.0
    return w0 * values[0] + w1 * values[1] + w2 * values[2] + w3 * values[3]


def mackey_glass(
    n_samples: int = 1000,
    a: float = 0.2,
    b: float = 0.1,
    power: float = 10.0,
    tau: float = 17.0,
    dt: float = 1.0,
    x0: float = 1.2,
    discard: int = 100,
    noise_sd: float = 0.0,
    seed=None,
) -> np.ndarray:
    """Delayed-feedback series dx/dt = a*x(t-tau)/(1+x(t-tau)^power) - b*x(t),
    integrated with classical fourth-order Runge-Kutta.

    The history is constant (x0) for t <= 0 and the leading ``discard``
    samples are dropped to shed the transient.  The delay must be an integer
    number of at least three steps; the half-step delayed value each stage
    needs is cubic-interpolated from the stored grid (stencils never straddle
    the t = 0 history kink, keeping the integrator genuinely fourth order).
    Optional white Gaussian noise is added after generation.
    """
    d_float = tau / dt
    d = int(round(d_float))
    if abs(d_float - d) > 1e-9 or d < 3:
        raise ValueError("delay must be an integer multiple of dt spanning >= 3 steps")
    n_steps = discard + n_samples - 1
    x = np.empty(d + n_steps + 1)
    x[: d + 1] = x0  # t in [-tau, 0]

    def deriv(xc: float, xd: float) -> float:
        return a * xd / (1.0 + xd**power) - b * xc

    half = 0.5 * dt
    for i in range(n_steps):
        xc = x[d + i]
        xd0 = x[i]
        q = i - d + 0.5  # grid coordinate of t_i + dt/2 - tau
        if q <= 0.0:
            xd_half = x0
        else:
            lo = max(int(math.floor(q)) - 1, 0)
            xd_half = _lagrange4(x[d + lo: d + lo + 4], q - lo)
        xd1 = x[i + 1]
        k1 = deriv(xc, xd0)
        k2 = deriv(xc + half * k1, xd_half)
        k3 = deriv(xc + half * k2, xd_half)
        k4 = deriv(xc + dt * k3, xd1)
        x[d + i + 1] = xc + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    series = x[d + discard: d + discard + n_samples].copy()
    if noise_sd > 0.0:
        series += np.random.default_rng(seed).normal(0.0, noise_sd, size=n_samples)
    return series


def teacher_mlp_data(
    n_samples: int = 10000,
    n_inputs: int = 10,
    hidden: int = 200,
    activation: str = "tanh",
    weight_sd: float = 2.0,
    seed=None,
) -> tuple[np.ndarray, np.ndarray, Mlp]:
    """Inputs uniform in [-1, 1]^n propagated through a random two-layer
    teacher network whose weights and biases are N(0, weight_sd^2)."""
    rng = np.random.default_rng(seed)
    teacher = Mlp.random_teacher(n_inputs, hidden, activation, rng, sd=weight_sd)
    x = rng.uniform(-1.0, 1.0, size=(n_samples, n_inputs))
    return x, teacher.forward(x), teacher


def build_windows(
    series: np.ndarray,
    n_lags: int = 4,
    spacing: int = 1,
    horizon: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Lagged windows: row t is (x(t-(n_lags-1)*spacing), ..., x(t-spacing),
    x(t)) and the target is x(t+horizon)."""
    series = np.asarray(series, dtype=float).ravel()
    span = (n_lags - 1) * spacing
    m = series.size - span - horizon
    if m <= 0:
        raise ValueError(
            f"series of length {series.size} too short for span {span} + horizon {horizon}"
        )
    t = np.arange(span, span + m)
    offsets = np.arange(-span, 1, spacing)
    x = series[t[:, None] + offsets[None, :]]
    y = series[t + horizon]
    return x, y


def split_indices(n: int, ratios=(0.6, 0.2, 0.2), seed=None):
    """Random disjoint train/val/test index partition covering 0..n-1."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise ValueError(f"cannot split {n} samples into ratios {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def make_dataset(x, y, ratios=(0.6, 0.2, 0.2), seed=None) -> Dataset:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    idx_train, idx_val, idx_test = split_indices(x.shape[0], ratios, seed)
    return Dataset(x, y, idx_train, idx_val, idx_test)


class CsvSeries(NamedTuple):
    values: np.ndarray
    n_dropped: int


def ingest_csv(path, date_column: str = "date", close_column: str = "close") -> CsvSeries:
    """Read a (date, closing-price) CSV into a chronologically ascending
    series.  Rows with empty values are dropped (count reported); rows with
    unparseable dates or prices raise with their line numbers."""
    rows: list[tuple[date, float]] = []
    bad_lines: list[int] = []
    n_dropped = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        missing = [c for c in (date_column, close_column) if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}; found {reader.fieldnames}")
        for line_no, row in enumerate(reader, start=2):
            raw_date = (row.get(date_column) or "").strip()
            raw_close = (row.get(close_column) or "").strip()
            if not raw_date or not raw_close:
                n_dropped += 1
                continue
            try:
                when = date.fromisoformat(raw_date)
                close = float(raw_close)
            except ValueError:
                bad_lines.append(line_no)
                continue
            rows.append((when, close))
    if bad_lines:
        raise ValueError(f"{path}: malformed rows at lines {bad_lines}")
    rows.sort(key=lambda item: item[0])
    return CsvSeries(np.array([close for _, close in rows]), n_dropped)


def write_series_csv(series, path, start: str = "2000-01-01"):
    """Export a series in the ingestable (date, close) shape."""
    day0 = date.fromisoformat(start)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for i, value in enumerate(np.asarray(series, dtype=float).ravel()):
            writer.writerow([(day0 + timedelta(days=i)).isoformat(), repr(float(value))])
