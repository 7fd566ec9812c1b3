"""DTW, its banded (Sakoe-Chiba) and multiresolution (FastDTW) approximations,
similarity matrices, and per-comparison instrumentation."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from isr import _kernels
from isr.lattice import Section
from isr.series import MultiChannelSeries

GRID_RADII = (1, 5, 10, 15, 20, 25, 30)

KIND_DTW = "DTW"
KIND_SC = "SC_DTW"
KIND_FAST = "FAST_DTW"


class SimilarityError(ValueError):
    """Raised for malformed similarity inputs."""


@dataclass(frozen=True, order=True)
class SimilaritySpec:
    """One of the 15 grid similarity functions: DTW, or SC-DTW / FastDTW with a
    radius from the 7-value grid."""

    kind: str
    radius: int | None = None

    def __post_init__(self):
        if self.kind not in (KIND_DTW, KIND_SC, KIND_FAST):
            raise SimilarityError(f"unknown similarity kind {self.kind!r}")
        if self.kind == KIND_DTW:
            if self.radius is not None:
                raise SimilarityError("DTW takes no radius")
        elif self.radius is None or self.radius < 1:
            raise SimilarityError(f"{self.kind} needs a radius >= 1")

    @property
    def label(self) -> str:
        return self.kind if self.radius is None else f"{self.kind}:{self.radius}"

    @classmethod
    def parse(cls, text: str) -> "SimilaritySpec":
        kind, _, radius = text.partition(":")
        return cls(kind, int(radius) if radius else None)

    def compute(self, a, b) -> float:
        a = _as_values(a)
        b = _as_values(b)
        if self.kind == KIND_DTW:
            return dtw_values(a, b)
        if self.kind == KIND_SC:
            return sc_dtw_values(a, b, self.radius)
        return fast_dtw_values(a, b, self.radius)


def all_specs() -> list[SimilaritySpec]:
    """The 15-function similarity universe used by the grid search."""
    specs = [SimilaritySpec(KIND_DTW)]
    specs.extend(SimilaritySpec(KIND_SC, r) for r in GRID_RADII)
    specs.extend(SimilaritySpec(KIND_FAST, r) for r in GRID_RADII)
    return specs


@dataclass(frozen=True)
class CompareRecord:
    """One pairwise similarity computation with its wall-clock cost."""

    len_a: int
    len_b: int
    spec: SimilaritySpec
    cost: float
    ttc_seconds: float
    error: float | None = None


def point_distance(frame_a: Sequence[float], frame_b: Sequence[float]) -> float:
    """Euclidean distance across per-channel differences."""
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    if a.shape != b.shape:
        raise SimilarityError("channel-count mismatch")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _as_values(series) -> np.ndarray:
    if isinstance(series, MultiChannelSeries):
        return series.values
    return np.ascontiguousarray(np.asarray(series, dtype=np.float64))


def _check_nonempty(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise SimilarityError("empty input")
    if a.shape[1] != b.shape[1]:
        raise SimilarityError("channel-count mismatch")


def dtw(a, b) -> float:
    """Exact minimum-cost monotone warping alignment (steps down/right/diagonal)."""
    return dtw_values(_as_values(a), _as_values(b))


def dtw_values(a: np.ndarray, b: np.ndarray) -> float:
    _check_nonempty(a, b)
    return float(_kernels.dtw_cost(a, b))


def sc_dtw(a, b, radius: int) -> float:
    """DTW restricted to a slope-scaled diagonal band 2*radius+1 cells wide."""
    return sc_dtw_values(_as_values(a), _as_values(b), radius)


def sc_dtw_values(a: np.ndarray, b: np.ndarray, radius: int) -> float:
    _check_nonempty(a, b)
    if radius < 1:
        raise SimilarityError("radius must be >= 1")
    lo, hi = _kernels.sakoe_chiba_window(a.shape[0], b.shape[0], radius)
    return float(_kernels.banded_cost(a, b, lo, hi))


def fast_dtw(a, b, radius: int) -> float:
    """Multiresolution DTW: halve by PAA, solve coarse, project the coarse path
    up, widen it by ``radius``, and solve within that window."""
    return fast_dtw_values(_as_values(a), _as_values(b), radius)


def fast_dtw_values(a: np.ndarray, b: np.ndarray, radius: int) -> float:
    _check_nonempty(a, b)
    if radius < 1:
        raise SimilarityError("radius must be >= 1")
    cost, _, _ = _fast_dtw_rec(a, b, radius)
    return float(cost)


def _full_window(n: int, m: int):
    lo = np.zeros(n, dtype=np.int64)
    hi = np.full(n, m - 1, dtype=np.int64)
    return lo, hi


def _fast_dtw_rec(a: np.ndarray, b: np.ndarray, radius: int):
    n, m = a.shape[0], b.shape[0]
    if min(n, m) <= radius + 2:
        lo, hi = _full_window(n, m)
        return _kernels.banded_cost_path(a, b, lo, hi)
    a2 = _kernels.halve(a)
    b2 = _kernels.halve(b)
    _, path_i, path_j = _fast_dtw_rec(a2, b2, radius)
    lo, hi = _kernels.expand_path_window(
        path_i, path_j, a2.shape[0], b2.shape[0], n, m, radius
    )
    return _kernels.banded_cost_path(a, b, lo, hi)


def approximation_error(true_cost: float, approx_cost: float) -> float | None:
    """|true - approx| / true; 0 when both are 0, undefined when only the exact
    cost is 0 (excluded from aggregates)."""
    if true_cost < 0 or approx_cost < 0:
        raise SimilarityError("costs must be non-negative")
    if true_cost == 0:
        return 0.0 if approx_cost == 0 else None
    return abs(true_cost - approx_cost) / true_cost


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric pairwise cost matrix over the clips of one section."""

    item_ids: tuple[str, ...]
    values: np.ndarray
    spec: SimilaritySpec
    section: Section

    def row(self, item_id: str) -> np.ndarray:
        return self.values[self.item_ids.index(item_id)]

    def submatrix(self, row_ids: Sequence[str], col_ids: Sequence[str]) -> np.ndarray:
        ri = [self.item_ids.index(i) for i in row_ids]
        ci = [self.item_ids.index(i) for i in col_ids]
        return self.values[np.ix_(ri, ci)]


def pair_cost(spec: SimilaritySpec, a: np.ndarray | None, b: np.ndarray | None) -> float:
    """Cost of one clip pair; a session that never entered the section is
    represented by None and compared against a single all-zeros frame."""
    a_empty = a is None or a.shape[0] == 0
    b_empty = b is None or b.shape[0] == 0
    if a_empty and b_empty:
        return 0.0
    if a_empty or b_empty:
        other = b if a_empty else a
        return float(np.sqrt(np.sum(other**2, axis=1)).sum())
    return spec.compute(a, b)


def build_similarity_matrix(
    clips: Sequence[np.ndarray | None],
    item_ids: Sequence[str],
    spec: SimilaritySpec,
    section: Section,
    records: list[CompareRecord] | None = None,
) -> SimilarityMatrix:
    """Pairwise costs over the per-session clippings of one section.

    Each computation is timed (monotonic clock, kernel only) and optionally
    logged into ``records``."""
    n = len(clips)
    if n < 2:
        raise SimilarityError("degenerate matrix")
    if len(item_ids) != n:
        raise SimilarityError("ids and clips length mismatch")
    values = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            t0 = time.perf_counter_ns()
            cost = pair_cost(spec, clips[i], clips[j])
            ttc = (time.perf_counter_ns() - t0) / 1e9
            values[i, j] = values[j, i] = cost
            if records is not None:
                records.append(
                    CompareRecord(
                        len_a=0 if clips[i] is None else clips[i].shape[0],
                        len_b=0 if clips[j] is None else clips[j].shape[0],
                        spec=spec,
                        cost=cost,
                        ttc_seconds=ttc,
                    )
                )
    return SimilarityMatrix(tuple(item_ids), values, spec, section)


def write_matrix_csv(path: str | Path, matrix: SimilarityMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("id",) + matrix.item_ids)
        for item_id, row in zip(matrix.item_ids, matrix.values):
            writer.writerow([item_id] + [f"{v:.9g}" for v in row])


def write_compare_log(path: str | Path, records: Iterable[CompareRecord], append: bool = False) -> None:
    mode = "a" if append else "w"
    exists = append and Path(path).exists() and Path(path).stat().st_size > 0
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(("len_a", "len_b", "kind", "radius", "cost", "ttc_s", "error"))
        for rec in records:
            writer.writerow(
                (
                    rec.len_a,
                    rec.len_b,
                    rec.spec.kind,
                    "" if rec.spec.radius is None else rec.spec.radius,
                    f"{rec.cost:.9g}",
                    f"{rec.ttc_seconds:.9g}",
                    "" if rec.error is None else f"{rec.error:.9g}",
                )
            )
