"""Route-coverage and agreement metrics over ensemble footprints, computed as
exact rationals on waypoint counts."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class MetricsError(ValueError):
    """Raised for malformed metric inputs."""


@dataclass(frozen=True)
class FootprintSet:
    """Per-fold waypoint sets with the lattice and event waypoint universes."""

    fold_footprints: tuple[frozenset[int], ...]
    lattice_waypoints: frozenset[int]
    event_waypoints: frozenset[int]

    def __post_init__(self):
        if not self.fold_footprints:
            raise MetricsError("need at least one fold footprint")
        for s in self.fold_footprints:
            if not s <= self.lattice_waypoints:
                raise MetricsError("footprint leaves the lattice")
        if not self.event_waypoints <= self.lattice_waypoints:
            raise MetricsError("events leave the lattice")

    @property
    def union(self) -> frozenset[int]:
        out: frozenset[int] = frozenset()
        for s in self.fold_footprints:
            out |= s
        return out

    @property
    def intersection(self) -> frozenset[int]:
        out = self.fold_footprints[0]
        for s in self.fold_footprints[1:]:
            out &= s
        return out


def accuracy(true_labels: Sequence, predicted: Sequence) -> Fraction:
    """Fraction of exactly matching predictions."""
    if len(true_labels) != len(predicted) or len(true_labels) == 0:
        raise MetricsError("label lists must be equal-length and non-empty")
    hits = sum(1 for t, p in zip(true_labels, predicted) if t == p)
    return Fraction(hits, len(true_labels))


def puor(footprints: FootprintSet) -> Fraction:
    """Union coverage of the route: |union S_i| / |L|."""
    return Fraction(len(footprints.union), len(footprints.lattice_waypoints))


def pior(footprints: FootprintSet) -> Fraction:
    """Unanimous coverage of the route: |intersection S_i| / |L|."""
    return Fraction(len(footprints.intersection), len(footprints.lattice_waypoints))


def jiwu(footprints: FootprintSet) -> Fraction:
    """PIoR / PUoR; 0 when every footprint is empty."""
    p = puor(footprints)
    if p == 0:
        return Fraction(0)
    return pior(footprints) / p


def jiwe(footprints: FootprintSet) -> Fraction:
    """Jaccard agreement of the unanimous footprint with the event waypoints:
    |(intersection S_i) & E| / |(union S_i) | E|; 0 when the denominator is 0."""
    num = len(footprints.intersection & footprints.event_waypoints)
    den = len(footprints.union | footprints.event_waypoints)
    if den == 0:
        return Fraction(0)
    return Fraction(num, den)


def render(value: Fraction) -> str:
    """Rational rendered to 4 decimal places for CSV reports."""
    return f"{float(value):.4f}"
