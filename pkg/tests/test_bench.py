"""Benchmark harness: corpus generation, aggregation math, CSV layout."""

import csv

import numpy as np
import pytest

from isr.bench import (
    AggregateRow,
    BenchError,
    aggregate_error,
    aggregate_ttc,
    length_bucket,
    loglog_slope,
    make_corpus,
    mean_error_by_spec,
    run_benchmark,
    write_bench_csvs,
)
from isr.similarity import CompareRecord, SimilaritySpec


class TestCorpus:
    def test_shape_and_lengths(self):
        pairs = make_corpus(0, length_buckets=(25, 50), pairs_per_bucket=3)
        assert len(pairs) == 6
        for i, (a, b) in enumerate(pairs):
            bucket = 25 if i < 3 else 50
            for clip in (a, b):
                assert bucket * 0.9 <= clip.frame_count <= bucket
                assert clip.n_channels == 7

    def test_deterministic(self):
        first = make_corpus(1, length_buckets=(25,), pairs_per_bucket=2)
        second = make_corpus(1, length_buckets=(25,), pairs_per_bucket=2)
        for (a1, b1), (a2, b2) in zip(first, second):
            np.testing.assert_array_equal(a1.values, a2.values)
            np.testing.assert_array_equal(b1.values, b2.values)

    def test_validation(self):
        with pytest.raises(BenchError):
            make_corpus(0, length_buckets=(), pairs_per_bucket=1)
        with pytest.raises(BenchError):
            make_corpus(0, length_buckets=(25,), pairs_per_bucket=0)
        with pytest.raises(BenchError):
            make_corpus(0, length_buckets=(2,))


class TestRunBenchmark:
    def test_every_pair_under_every_spec(self):
        pairs = make_corpus(0, length_buckets=(25,), pairs_per_bucket=2)
        records = run_benchmark(pairs, repeats=1)
        assert len(records) == 2 * 15
        exact = [r for r in records if r.spec.label == "DTW"]
        assert all(r.error == 0.0 for r in exact)
        # Approximations never beat the exact cost.
        assert all(r.error is None or r.error >= 0 for r in records)

    def test_empty_corpus_rejected(self):
        with pytest.raises(BenchError):
            run_benchmark([])


class TestAggregation:
    def _record(self, length, label, ttc, error=None):
        spec = SimilaritySpec.parse(label)
        return CompareRecord(length, length, spec, 1.0, ttc, error)

    def test_length_bucket_envelope(self):
        assert length_bucket(self._record(100, "DTW", 0.1)) == 128
        assert length_bucket(self._record(128, "DTW", 0.1)) == 128
        assert length_bucket(self._record(129, "DTW", 0.1)) == 256

    def test_mean_count_stddev(self):
        records = [
            self._record(100, "DTW", 1.0),
            self._record(100, "DTW", 3.0),
            self._record(300, "DTW", 5.0),
        ]
        rows = aggregate_ttc(records)
        by_bucket = {r.bucket: r for r in rows}
        assert by_bucket[128].mean == pytest.approx(2.0)
        assert by_bucket[128].count == 2
        assert by_bucket[128].stddev == pytest.approx(1.0)
        assert by_bucket[512].count == 1

    def test_error_rows_skip_undefined(self):
        records = [
            self._record(100, "SC_DTW:5", 1.0, error=0.5),
            self._record(100, "SC_DTW:5", 1.0, error=None),
        ]
        rows = aggregate_error(records)
        assert len(rows) == 1 and rows[0].count == 1

    def test_mean_error_by_spec(self):
        records = [
            self._record(10, "SC_DTW:5", 1.0, error=0.2),
            self._record(20, "SC_DTW:5", 1.0, error=0.4),
            self._record(10, "FAST_DTW:5", 1.0, error=0.1),
        ]
        means = mean_error_by_spec(records)
        assert means["SC_DTW:5"] == pytest.approx(0.3)
        assert means["FAST_DTW:5"] == pytest.approx(0.1)


class TestSlope:
    def test_recovers_known_exponent(self):
        # mean = bucket^2 exactly: slope must be 2.
        rows = [AggregateRow(b, "DTW", float(b) ** 2, 3, 0.0) for b in (64, 128, 256, 512)]
        assert loglog_slope(rows, "DTW") == pytest.approx(2.0, abs=1e-9)

    def test_min_bucket_filter(self):
        rows = [AggregateRow(b, "DTW", float(b), 1, 0.0) for b in (16, 32, 64, 128)]
        rows[0] = AggregateRow(16, "DTW", 1e9, 1, 0.0)  # outlier below cutoff
        assert loglog_slope(rows, "DTW", min_bucket=32) == pytest.approx(1.0, abs=1e-9)

    def test_needs_two_points(self):
        with pytest.raises(BenchError):
            loglog_slope([AggregateRow(64, "DTW", 1.0, 1, 0.0)], "DTW")


class TestCsvOutput:
    def test_files_and_headers(self, tmp_path):
        pairs = make_corpus(0, length_buckets=(25,), pairs_per_bucket=1)
        records = run_benchmark(pairs, repeats=1)
        ttc_path, err_path = write_bench_csvs(tmp_path, records)
        for path in (ttc_path, err_path):
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            assert rows[0] == ["bucket", "spec", "mean", "count", "stddev"]
            assert len(rows) > 1
        specs = {row[1] for row in list(csv.reader(open(ttc_path)))[1:]}
        assert len(specs) == 15
