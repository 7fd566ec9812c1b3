"""Timing and approximation-error benchmark across the 15 similarity
functions.

A seeded corpus of random-walk multichannel clips is compared pairwise: exact
DTW first (ground truth), then every approximation.  Wall-clock timings use a
warm-up pass plus median-of-3 repeats; aggregation buckets pairs by the
power-of-two envelope of the longer series and emits CSV tables suitable for
external plotting.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from isr.series import CHANNEL_NAMES, MultiChannelSeries
from isr.similarity import (
    CompareRecord,
    SimilaritySpec,
    all_specs,
    approximation_error,
    dtw,
)

DEFAULT_LENGTH_BUCKETS = (25, 50, 100, 200, 400, 800, 1600, 3200)


class BenchError(ValueError):
    """Raised for malformed benchmark inputs."""


def make_corpus(
    seed: int,
    length_buckets: Sequence[int] = DEFAULT_LENGTH_BUCKETS,
    pairs_per_bucket: int = 4,
) -> list[tuple[MultiChannelSeries, MultiChannelSeries]]:
    """Seeded pairs of smooth random-walk clips, stratified by length.

    Within a bucket the two series lengths jitter by up to 10% so the cost
    matrices are genuinely rectangular."""
    if pairs_per_bucket < 1 or not length_buckets:
        raise BenchError("need at least one bucket and one pair per bucket")
    pairs = []
    for bucket_index, bucket in enumerate(length_buckets):
        if bucket < 4:
            raise BenchError("bucket length too small")
        for pair_index in range(pairs_per_bucket):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, 0xBE9C, bucket_index, pair_index])
            )
            clips = []
            for _ in range(2):
                length = bucket - rng.integers(0, max(1, bucket // 10))
                steps = rng.normal(size=(int(length), len(CHANNEL_NAMES)))
                values = np.cumsum(steps * 0.2, axis=0) + rng.normal(
                    size=(int(length), len(CHANNEL_NAMES))
                )
                clips.append(MultiChannelSeries(values, 1.0, CHANNEL_NAMES))
            pairs.append((clips[0], clips[1]))
    return pairs


def _timed_cost(
    spec: SimilaritySpec,
    a: MultiChannelSeries,
    b: MultiChannelSeries,
    repeats: int,
) -> tuple[float, float]:
    """(cost, median wall-clock seconds) for one comparison."""
    timings = []
    cost = math.nan
    for _ in range(repeats):
        start = time.perf_counter_ns()
        cost = spec.compute(a, b)
        timings.append((time.perf_counter_ns() - start) / 1e9)
    return cost, sorted(timings)[len(timings) // 2]


def run_benchmark(
    corpus: Sequence[tuple[MultiChannelSeries, MultiChannelSeries]],
    specs: Sequence[SimilaritySpec] | None = None,
    repeats: int = 3,
) -> list[CompareRecord]:
    """Evaluate every corpus pair under every spec.

    The exact-DTW record of a pair carries error 0; approximation records
    carry their relative error against that pair's exact cost."""
    if specs is None:
        specs = all_specs()
    if not corpus:
        raise BenchError("empty corpus")
    # Warm the compiled kernels so the first timed pair is not paying for JIT.
    small = make_corpus(0, length_buckets=(8,), pairs_per_bucket=1)[0]
    for spec in specs:
        spec.compute(*small)

    records = []
    for a, b in corpus:
        truth = dtw(a, b)
        for spec in specs:
            cost, ttc = _timed_cost(spec, a, b, repeats)
            records.append(
                CompareRecord(
                    len_a=a.values.shape[0],
                    len_b=b.values.shape[0],
                    spec=spec,
                    cost=cost,
                    ttc_seconds=ttc,
                    error=approximation_error(truth, cost),
                )
            )
    return records


def length_bucket(record: CompareRecord) -> int:
    """Power-of-two envelope of the longer series."""
    longest = max(record.len_a, record.len_b)
    return 1 << max(0, math.ceil(math.log2(longest)))


@dataclass(frozen=True)
class AggregateRow:
    bucket: int
    spec_label: str
    mean: float
    count: int
    stddev: float


def _aggregate(values_by_key: dict[tuple[int, str], list[float]]) -> list[AggregateRow]:
    rows = []
    for (bucket, label), values in sorted(values_by_key.items()):
        arr = np.asarray(values, dtype=np.float64)
        rows.append(
            AggregateRow(bucket, label, float(arr.mean()), len(values), float(arr.std()))
        )
    return rows


def aggregate_ttc(records: Sequence[CompareRecord]) -> list[AggregateRow]:
    """Mean TTC per (bucket, spec)."""
    grouped: dict[tuple[int, str], list[float]] = {}
    for rec in records:
        grouped.setdefault((length_bucket(rec), rec.spec.label), []).append(
            rec.ttc_seconds
        )
    return _aggregate(grouped)


def aggregate_error(records: Sequence[CompareRecord]) -> list[AggregateRow]:
    """Mean approximation error per (bucket, spec); undefined errors excluded."""
    grouped: dict[tuple[int, str], list[float]] = {}
    for rec in records:
        if rec.error is None:
            continue
        grouped.setdefault((length_bucket(rec), rec.spec.label), []).append(rec.error)
    return _aggregate(grouped)


def write_aggregate_csv(path: str | Path, rows: Sequence[AggregateRow]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bucket", "spec", "mean", "count", "stddev"])
        for row in rows:
            writer.writerow(
                [row.bucket, row.spec_label, f"{row.mean:.9g}", row.count, f"{row.stddev:.9g}"]
            )


def write_bench_csvs(out_dir: str | Path, records: Sequence[CompareRecord]) -> tuple[Path, Path]:
    """Emit bench_ttc.csv and bench_error.csv under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ttc_path = out_dir / "bench_ttc.csv"
    err_path = out_dir / "bench_error.csv"
    write_aggregate_csv(ttc_path, aggregate_ttc(records))
    write_aggregate_csv(err_path, aggregate_error(records))
    return ttc_path, err_path


def loglog_slope(rows: Sequence[AggregateRow], spec_label: str, min_bucket: int = 0) -> float:
    """Least-squares slope of log(mean TTC) against log(bucket) for one spec."""
    points = [
        (math.log(row.bucket), math.log(row.mean))
        for row in rows
        if row.spec_label == spec_label and row.bucket >= min_bucket and row.mean > 0
    ]
    if len(points) < 2:
        raise BenchError(f"not enough buckets to fit a slope for {spec_label}")
    xs, ys = zip(*points)
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)


def mean_error_by_spec(records: Sequence[CompareRecord]) -> dict[str, float]:
    """Corpus-wide mean approximation error per spec label."""
    grouped: dict[str, list[float]] = {}
    for rec in records:
        if rec.error is None:
            continue
        grouped.setdefault(rec.spec.label, []).append(rec.error)
    return {label: float(np.mean(vals)) for label, vals in grouped.items()}
