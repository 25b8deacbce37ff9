"""Series generation, CSV ingestion, scaling and the train/test split."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError

PROTOCOL_LENGTH = 100
TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class MackeyGlassParams:
    alpha: float = 0.2
    beta: float = -0.1
    tau: float = 17.0
    x0: float = 1.2
    dt: float = 0.1
    stride: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("integration step dt must be positive")
        if self.tau < 0:
            raise ConfigurationError("delay tau must be non-negative")
        if not _is_multiple(self.tau, self.dt):
            raise ConfigurationError(f"tau={self.tau} is not a whole number of dt={self.dt} steps")
        if self.stride <= 0 or not _is_multiple(self.stride, self.dt):
            raise ConfigurationError(f"stride={self.stride} must be a positive multiple of dt={self.dt}")

    @property
    def delay_steps(self) -> int:
        return int(round(self.tau / self.dt))

    @property
    def stride_steps(self) -> int:
        return int(round(self.stride / self.dt))


def _is_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return abs(ratio - round(ratio)) < 1e-9 * max(1.0, abs(ratio))


def mackey_glass_rhs(x: float, x_delayed: float, params: MackeyGlassParams = MackeyGlassParams()) -> float:
    """dx/dt = beta x(t) + alpha x(t - tau) / (1 + x(t - tau)^10)."""
    return params.beta * x + params.alpha * x_delayed / (1.0 + x_delayed**10)


def mackey_glass(params: MackeyGlassParams = MackeyGlassParams(), n_points: int = PROTOCOL_LENGTH) -> np.ndarray:
    """Sample the delay equation at ``t = 0, stride, 2 stride, ...``.

    Classical RK4 on a grid of step ``dt``. The history is constant ``x0`` for
    t <= 0; the delayed value at half steps is linearly interpolated from
    the stored grid.
    """
    if n_points < 1:
        raise ConfigurationError("n_points must be >= 1")
    dt, lag = params.dt, params.delay_steps
    n_steps = (n_points - 1) * params.stride_steps
    x = np.empty(n_steps + 1)
    x[0] = params.x0

    def delayed(k: float) -> float:
        # value at grid position k - lag, k possibly half-integer
        pos = k - lag
        if pos <= 0:
            return params.x0
        lo = int(math.floor(pos))
        frac = pos - lo
        if frac == 0.0:
            return x[lo]
        return (1.0 - frac) * x[lo] + frac * x[lo + 1]

    for n in range(n_steps):
        xn = x[n]
        d0, dh, d1 = delayed(n), delayed(n + 0.5), delayed(n + 1)
        k1 = mackey_glass_rhs(xn, d0, params)
        k2 = mackey_glass_rhs(xn + 0.5 * dt * k1, dh, params)
        k3 = mackey_glass_rhs(xn + 0.5 * dt * k2, dh, params)
        k4 = mackey_glass_rhs(xn + dt * k3, d1, params)
        x[n + 1] = xn + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return x[:: params.stride_steps].copy()


def load_csv(path, column: str | int) -> np.ndarray:
    """Read one numeric column from a comma-separated file with a header row.

    ``column`` is a header name or a zero-based column index. Data rows are
    numbered from 1 in error messages.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path} is empty")
        header = [h.strip() for h in header]
        if isinstance(column, int):
            if not 0 <= column < len(header):
                raise DataError(f"{path} has no column index {column}")
            col = column
        elif column in header:
            col = header.index(column)
        else:
            raise DataError(f"{path} has no column {column!r} (columns: {', '.join(header)})")
        values = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            cell = row[col].strip() if col < len(row) else ""
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {row_no} column {header[col]!r}: not a number: {cell!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}: row {row_no} column {header[col]!r}: non-finite value {cell!r}")
            values.append(value)
    if len(values) < 2:
        raise DataError(f"{path}: need at least 2 numeric rows in column {header[col]!r}, found {len(values)}")
    return np.array(values)


def emit_csv(series, path, column: str = "x") -> None:
    """Write ``t,<column>`` rows; floats are written with full round-trip precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", column])
        for t, value in enumerate(np.asarray(series, dtype=float)):
            writer.writerow([t, repr(float(value))])


@dataclass(frozen=True)
class MinMaxScaler:
    lo: float
    hi: float

    def transform(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.lo) / (self.hi - self.lo)

    def inverse(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) * (self.hi - self.lo) + self.lo


def normalize(series, train: slice | None = None) -> tuple[np.ndarray, MinMaxScaler]:
    """Min-max scale with statistics from ``series[train]`` only."""
    series = np.asarray(series, dtype=float)
    fit = series[train] if train is not None else series
    lo, hi = float(np.min(fit)), float(np.max(fit))
    if not hi > lo:
        raise ConfigurationError("cannot normalize: training values are constant")
    scaler = MinMaxScaler(lo, hi)
    return scaler.transform(series), scaler


@dataclass(frozen=True)
class TimeSeriesDataset:
    name: str
    raw: np.ndarray
    normalized: np.ndarray
    scaler: MinMaxScaler
    train: slice
    test: slice = field(default=slice(0, 0))

    @property
    def train_norm(self) -> np.ndarray:
        return self.normalized[self.train]

    @property
    def test_raw(self) -> np.ndarray:
        return self.raw[self.test]

    @property
    def n_train(self) -> int:
        return self.train.stop - self.train.start

    @property
    def n_test(self) -> int:
        return self.test.stop - self.test.start


def split_80_20(series, name: str = "series", length: int = PROTOCOL_LENGTH) -> TimeSeriesDataset:
    """Keep the first ``length`` points, train on the first 80%, test on the rest."""
    series = np.asarray(series, dtype=float)
    if series.size < length:
        raise ConfigurationError(f"series {name!r} has {series.size} points, at least {length} required")
    raw = series[:length].copy()
    n_train = int(round(TRAIN_FRACTION * length))
    train, test = slice(0, n_train), slice(n_train, length)
    normalized, scaler = normalize(raw, train)
    return TimeSeriesDataset(name, raw, normalized, scaler, train, test)
