"""Similarity functions against independent oracles, plus dominance and
instrumentation behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from isr.lattice import Section
from isr.similarity import (
    GRID_RADII,
    SimilarityError,
    SimilaritySpec,
    all_specs,
    approximation_error,
    build_similarity_matrix,
    dtw,
    fast_dtw,
    pair_cost,
    sc_dtw,
)


def enumerate_dtw(a: np.ndarray, b: np.ndarray) -> float:
    """Exhaustive minimum over every monotone warping path (oracle).

    Written without dynamic programming on purpose: recursion over the three
    admissible steps, so it shares no code path with the implementation."""

    def point(i, j):
        return float(np.sqrt(np.sum((a[i] - b[j]) ** 2)))

    def best_from(i, j):
        if i == a.shape[0] - 1 and j == b.shape[0] - 1:
            return point(i, j)
        options = []
        if i + 1 < a.shape[0]:
            options.append(best_from(i + 1, j))
        if j + 1 < b.shape[0]:
            options.append(best_from(i, j + 1))
        if i + 1 < a.shape[0] and j + 1 < b.shape[0]:
            options.append(best_from(i + 1, j + 1))
        return point(i, j) + min(options)

    return best_from(0, 0)


def random_pair(rng, max_len=6, channels=3):
    la = int(rng.integers(1, max_len + 1))
    lb = int(rng.integers(1, max_len + 1))
    return rng.normal(size=(la, channels)), rng.normal(size=(lb, channels))


class TestSpec:
    def test_parse_and_label_round_trip(self):
        for spec in all_specs():
            assert SimilaritySpec.parse(spec.label) == spec

    def test_universe_cardinality(self):
        labels = [s.label for s in all_specs()]
        assert len(labels) == 15
        assert len(set(labels)) == 15

    def test_validation(self):
        with pytest.raises(SimilarityError):
            SimilaritySpec("DTW", 3)
        with pytest.raises(SimilarityError):
            SimilaritySpec("SC_DTW")
        with pytest.raises(SimilarityError):
            SimilaritySpec("FAST_DTW", 0)
        with pytest.raises(SimilarityError):
            SimilaritySpec("EUCLID")


class TestDtwOracle:
    def test_exhaustive_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            a, b = random_pair(rng)
            got = dtw(a, b)
            want = enumerate_dtw(a, b)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_single_frames(self):
        a = np.array([[1.0, 2.0]])
        b = np.array([[4.0, 6.0]])
        assert dtw(a, b) == pytest.approx(5.0)

    def test_identity_is_zero(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(30, 7))
        assert dtw(a, a) == 0.0

    def test_rejects_empty_and_mismatched(self):
        a = np.zeros((3, 2))
        with pytest.raises(SimilarityError):
            dtw(a, np.zeros((0, 2)))
        with pytest.raises(SimilarityError):
            dtw(a, np.zeros((3, 3)))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_pair(rng, max_len=20)
        assert dtw(a, b) == pytest.approx(dtw(b, a), rel=1e-12)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_pair(rng, max_len=20)
        assert dtw(a, b) >= 0.0


class TestApproximations:
    def test_dominance(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            la, lb = rng.integers(10, 80, size=2)
            a = rng.normal(size=(int(la), 4))
            b = rng.normal(size=(int(lb), 4))
            exact = dtw(a, b)
            for radius in GRID_RADII:
                assert sc_dtw(a, b, radius) >= exact - 1e-9
                assert fast_dtw(a, b, radius) >= exact - 1e-9

    def test_sc_band_nesting(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=(60, 3))
        b = rng.normal(size=(55, 3))
        costs = [sc_dtw(a, b, r) for r in GRID_RADII]
        # A wider band can only find an equal or cheaper path.
        for narrow, wide in zip(costs, costs[1:]):
            assert wide <= narrow + 1e-9

    def test_sc_full_band_equals_dtw(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=(40, 3))
        b = rng.normal(size=(37, 3))
        assert sc_dtw(a, b, 40) == pytest.approx(dtw(a, b), rel=1e-12)

    def test_fast_identical_inputs(self):
        rng = np.random.default_rng(10)
        a = rng.normal(size=(50, 3))
        assert fast_dtw(a, a, 1) == pytest.approx(0.0, abs=1e-9)

    def test_radius_validation(self):
        a = np.zeros((5, 1))
        with pytest.raises(SimilarityError):
            sc_dtw(a, a, 0)
        with pytest.raises(SimilarityError):
            fast_dtw(a, a, 0)


class TestApproximationError:
    def test_basic(self):
        assert approximation_error(10.0, 12.0) == pytest.approx(0.2)
        assert approximation_error(0.0, 0.0) == 0.0
        assert approximation_error(0.0, 1.0) is None

    def test_negative_rejected(self):
        with pytest.raises(SimilarityError):
            approximation_error(-1.0, 0.0)


class TestPairCost:
    def test_both_empty(self):
        spec = SimilaritySpec("DTW")
        assert pair_cost(spec, None, None) == 0.0
        assert pair_cost(spec, np.zeros((0, 3)), None) == 0.0

    def test_one_empty_uses_zero_reference(self):
        spec = SimilaritySpec("DTW")
        clip = np.array([[3.0, 4.0], [0.0, 0.0]])
        # Frame norms against an all-zeros reference: 5 + 0.
        assert pair_cost(spec, clip, None) == pytest.approx(5.0)
        assert pair_cost(spec, None, clip) == pytest.approx(5.0)


class TestSimilarityMatrix:
    def _clips(self, n=5, seed=0):
        rng = np.random.default_rng(seed)
        return [rng.normal(size=(int(rng.integers(5, 15)), 3)) for _ in range(n)]

    def test_symmetric_zero_diagonal(self):
        clips = self._clips()
        ids = [f"s{i}" for i in range(len(clips))]
        matrix = build_similarity_matrix(clips, ids, SimilaritySpec("DTW"), Section(0, 100))
        np.testing.assert_allclose(matrix.values, matrix.values.T)
        np.testing.assert_allclose(np.diag(matrix.values), 0.0)

    def test_records_logged(self):
        clips = self._clips(4)
        ids = [f"s{i}" for i in range(4)]
        records = []
        build_similarity_matrix(clips, ids, SimilaritySpec("DTW"), Section(0, 100), records)
        assert len(records) == 6  # upper triangle of a 4x4 matrix
        assert all(r.ttc_seconds >= 0 for r in records)

    def test_submatrix(self):
        clips = self._clips(4)
        ids = ["a", "b", "c", "d"]
        matrix = build_similarity_matrix(clips, ids, SimilaritySpec("DTW"), Section(0, 100))
        sub = matrix.submatrix(["b", "d"], ["a", "c"])
        assert sub[0, 0] == matrix.values[1, 0]
        assert sub[1, 1] == matrix.values[3, 2]

    def test_degenerate_rejected(self):
        with pytest.raises(SimilarityError):
            build_similarity_matrix([np.zeros((3, 1))], ["a"], SimilaritySpec("DTW"), Section(0, 100))


@given(
    arrays(np.float64, (4, 2), elements=st.floats(-100, 100)),
    arrays(np.float64, (5, 2), elements=st.floats(-100, 100)),
)
@settings(max_examples=50, deadline=None)
def test_dtw_matches_oracle_property(a, b):
    assert dtw(a, b) == pytest.approx(enumerate_dtw(a, b), rel=1e-12, abs=1e-9)
