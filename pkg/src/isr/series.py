"""Multi-channel time series: PAA downsampling, sliding windows, z-normalization,
and session CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Fixed channel order; serialized matrices and models stay byte-comparable.
CHANNEL_NAMES = (
    "throttle",      # percent depression of accelerator pedal
    "brake",         # percent depression of brake pedal
    "steering",      # steering wheel rotation, degrees
    "velocity",      # forward velocity, mph
    "jerk",          # forward jerk, mph/s^2
    "lane_pos",      # lateral offset from lane center, feet
    "heading_err",   # heading error, degrees
)

SESSION_CSV_HEADER = ("t", "dist_m") + CHANNEL_NAMES


class SeriesError(ValueError):
    """Raised for malformed series inputs."""


@dataclass(frozen=True)
class MultiChannelSeries:
    """An ordered set of equal-length real-valued channels sampled at a fixed rate.

    ``values`` has shape (frame_count, n_channels).  Driving sessions always use
    the 7 channels in :data:`CHANNEL_NAMES`; unit tests may build narrower series
    by passing explicit ``channel_names``.
    """

    values: np.ndarray
    rate_hz: float
    channel_names: tuple[str, ...] = CHANNEL_NAMES

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise SeriesError("series values must be a 2-D (frames x channels) array")
        if values.shape[1] != len(self.channel_names):
            raise SeriesError(
                f"{values.shape[1]} channels but {len(self.channel_names)} channel names"
            )
        if self.rate_hz <= 0:
            raise SeriesError("rate_hz must be positive")
        object.__setattr__(self, "values", values)

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, self.channel_names.index(name)]

    def slice(self, start: int, stop: int) -> "MultiChannelSeries":
        if not (0 <= start <= stop <= self.frame_count):
            raise SeriesError(f"slice [{start}, {stop}) out of bounds")
        return MultiChannelSeries(self.values[start:stop], self.rate_hz, self.channel_names)


@dataclass(frozen=True)
class Window:
    """A full-length view of ``length_frames`` frames starting at ``start_frame``."""

    start_frame: int
    length_frames: int
    data: MultiChannelSeries


@dataclass(frozen=True)
class Session:
    """One driver's telemetry for one route, with distance-along-route per frame."""

    session_id: str
    participant_id: str
    route_id: str
    label: str
    series: MultiChannelSeries
    dist_m: np.ndarray

    def __post_init__(self):
        dist = np.asarray(self.dist_m, dtype=np.float64)
        if dist.shape != (self.series.frame_count,):
            raise SeriesError("dist_m length must match frame count")
        object.__setattr__(self, "dist_m", dist)


def paa_downsample(series: MultiChannelSeries, factor: int) -> MultiChannelSeries:
    """Piecewise aggregate approximation: per-channel block means over ``factor``
    consecutive frames.  A shorter tail block is averaged, not dropped."""
    if factor < 1:
        raise SeriesError("factor must be >= 1")
    n = series.frame_count
    if n == 0:
        raise SeriesError("empty input")
    if factor == 1:
        return series
    out = paa_array(series.values, factor)
    return MultiChannelSeries(out, series.rate_hz / factor, series.channel_names)


def paa_array(values: np.ndarray, factor: int) -> np.ndarray:
    """Block-mean a (frames x channels) array; tail block may be shorter."""
    n = values.shape[0]
    n_out = math.ceil(n / factor)
    full = n // factor
    out = np.empty((n_out, values.shape[1]), dtype=np.float64)
    if full:
        out[:full] = values[: full * factor].reshape(full, factor, -1).mean(axis=1)
    if n_out > full:
        out[full] = values[full * factor :].mean(axis=0)
    return out


def sliding_windows(series: MultiChannelSeries, size: int, stride: int) -> list[Window]:
    """Full windows at offsets 0, stride, 2*stride, ...; short series yield []."""
    if size < 1 or stride < 1:
        raise SeriesError("size and stride must be >= 1")
    windows = []
    for start in range(0, series.frame_count - size + 1, stride):
        windows.append(Window(start, size, series.slice(start, start + size)))
    return windows


def z_normalize(series: MultiChannelSeries) -> MultiChannelSeries:
    """Per-channel zero mean, unit population std; near-constant channels map to
    all zeros."""
    if series.frame_count == 0:
        raise SeriesError("empty input")
    return MultiChannelSeries(
        z_normalize_array(series.values), series.rate_hz, series.channel_names
    )


def z_normalize_array(values: np.ndarray) -> np.ndarray:
    mean = values.mean(axis=0)
    std = values.std(axis=0)  # population std
    out = values - mean
    keep = std >= 1e-9
    out[:, keep] /= std[keep]
    out[:, ~keep] = 0.0
    return out


def write_session_csv(path: str | Path, session: Session) -> None:
    rate = session.series.rate_hz
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SESSION_CSV_HEADER)
        for i in range(session.series.frame_count):
            row = [f"{i / rate:.6f}", f"{session.dist_m[i]:.6f}"]
            row.extend(f"{v:.6f}" for v in session.series.values[i])
            writer.writerow(row)


def read_session_csv(
    path: str | Path,
    session_id: str,
    participant_id: str,
    route_id: str,
    label: str,
    rate_hz: float,
) -> Session:
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(1, -1)
    if data.shape[1] != len(SESSION_CSV_HEADER):
        raise SeriesError(f"expected {len(SESSION_CSV_HEADER)} columns in {path}")
    series = MultiChannelSeries(data[:, 2:], rate_hz)
    return Session(session_id, participant_id, route_id, label, series, data[:, 1])
