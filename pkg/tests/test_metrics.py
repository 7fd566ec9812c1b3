"""Coverage and agreement metrics against brute-force set oracles, plus the
exact rational identities that tie them together."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isr.metrics import (
    FootprintSet,
    MetricsError,
    accuracy,
    jiwe,
    jiwu,
    pior,
    puor,
    render,
)

LATTICE = frozenset(range(40))


def fps(folds, events=frozenset(), lattice=LATTICE):
    return FootprintSet(tuple(frozenset(f) for f in folds), lattice, frozenset(events))


def random_footprints(rng, n_folds, lattice_size=40):
    lattice = frozenset(range(lattice_size))
    folds = []
    for _ in range(n_folds):
        mask = rng.random(lattice_size) < rng.uniform(0.0, 0.9)
        folds.append(frozenset(int(i) for i in range(lattice_size) if mask[i]))
    n_events = int(rng.integers(0, lattice_size))
    events = frozenset(int(i) for i in rng.choice(lattice_size, n_events, replace=False))
    return FootprintSet(tuple(folds), lattice, events)


class TestValidation:
    def test_footprint_must_stay_inside_lattice(self):
        with pytest.raises(MetricsError):
            fps([{50}])

    def test_events_must_stay_inside_lattice(self):
        with pytest.raises(MetricsError):
            fps([{1}], events={99})

    def test_needs_a_fold(self):
        with pytest.raises(MetricsError):
            FootprintSet((), LATTICE, frozenset())


class TestAccuracy:
    def test_exact_fraction(self):
        assert accuracy(["A", "B", "C"], ["A", "B", "X"]) == Fraction(2, 3)

    def test_mismatched_rejected(self):
        with pytest.raises(MetricsError):
            accuracy(["A"], [])


class TestAgainstSetOracle:
    """Each metric recomputed with raw python set operations."""

    def test_random_sets(self):
        import numpy as np

        rng = np.random.default_rng(0)
        for _ in range(300):
            fp = random_footprints(rng, int(rng.integers(1, 6)))
            union = set().union(*fp.fold_footprints)
            inter = set(fp.fold_footprints[0]).intersection(*fp.fold_footprints[1:])
            assert puor(fp) == Fraction(len(union), 40)
            assert pior(fp) == Fraction(len(inter), 40)
            expected_jiwu = Fraction(0) if not union else Fraction(len(inter), len(union))
            assert jiwu(fp) == expected_jiwu
            den = len(union | set(fp.event_waypoints))
            expected_jiwe = Fraction(0) if den == 0 else Fraction(
                len(inter & set(fp.event_waypoints)), den
            )
            assert jiwe(fp) == expected_jiwe

    def test_worked_example(self):
        fp = fps([{0, 1, 2, 3}, {2, 3, 4, 5}], events={3, 4})
        assert puor(fp) == Fraction(6, 40)
        assert pior(fp) == Fraction(2, 40)
        assert jiwu(fp) == Fraction(1, 3)
        assert jiwe(fp) == Fraction(1, 6)  # |{3}| / |{0..5} u {3,4}|


class TestIdentities:
    @given(st.integers(min_value=0, max_value=100_000))
    @settings(max_examples=200, deadline=None)
    def test_jiwu_times_puor_is_pior(self, seed):
        import numpy as np

        rng = np.random.default_rng(seed)
        fp = random_footprints(rng, int(rng.integers(1, 6)))
        assert jiwu(fp) * puor(fp) == pior(fp)

    @given(st.integers(min_value=0, max_value=100_000))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, seed):
        import numpy as np

        rng = np.random.default_rng(seed)
        fp = random_footprints(rng, int(rng.integers(1, 6)))
        assert 0 <= pior(fp) <= puor(fp) <= 1
        assert 0 <= jiwu(fp) <= 1
        assert 0 <= jiwe(fp) <= 1


class TestEdgeCases:
    def test_empty_folds_give_zero_everywhere(self):
        fp = fps([set(), set()], events={1, 2})
        assert puor(fp) == 0
        assert pior(fp) == 0
        assert jiwu(fp) == 0  # defined as 0 at PUoR = 0
        assert jiwe(fp) == 0

    def test_perfect_agreement_with_events(self):
        fp = fps([{1, 2}, {1, 2}], events={1, 2})
        assert jiwu(fp) == 1
        assert jiwe(fp) == 1

    def test_render(self):
        assert render(Fraction(2, 3)) == "0.6667"
        assert render(Fraction(0)) == "0.0000"
