"""Route lattices (5 m waypoints), top-level sections, recursive subdivision,
and spatial clipping of sessions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from isr.series import MultiChannelSeries, Session

WAYPOINT_SPACING_M = 5
TOP_SECTION_LENGTH_M = 1600
TOP_SECTION_STRIDE_M = 800


class LatticeError(ValueError):
    """Raised for malformed lattices, sections, or clip inputs."""


@dataclass(frozen=True)
class RouteEvent:
    name: str
    start_m: int
    end_m: int


@dataclass(frozen=True)
class RouteLattice:
    """Ordered 5 m waypoints along one route, with scripted event annotations."""

    route_id: str
    length_m: int
    events: tuple[RouteEvent, ...] = ()

    def __post_init__(self):
        if self.length_m % WAYPOINT_SPACING_M != 0:
            raise LatticeError("route length must be a multiple of 5 m")
        if self.waypoint_count < TOP_SECTION_LENGTH_M // WAYPOINT_SPACING_M:
            raise LatticeError("route too short")
        for ev in self.events:
            if not (0 <= ev.start_m < ev.end_m <= self.length_m):
                raise LatticeError(f"event {ev.name} out of bounds")

    @property
    def waypoint_count(self) -> int:
        return self.length_m // WAYPOINT_SPACING_M

    def event_waypoints(self) -> frozenset[int]:
        """Union of waypoint indices covered by scripted events."""
        indices: set[int] = set()
        for ev in self.events:
            indices.update(
                range(ev.start_m // WAYPOINT_SPACING_M, ev.end_m // WAYPOINT_SPACING_M)
            )
        return frozenset(indices)


@dataclass(frozen=True, order=True)
class Section:
    """Half-open interval [start_m, end_m) of a route; ISR's unit of reduction."""

    start_m: int
    end_m: int
    depth: int = 0

    def __post_init__(self):
        if self.start_m % WAYPOINT_SPACING_M or self.end_m % WAYPOINT_SPACING_M:
            raise LatticeError("section bounds must sit on the 5 m grid")
        if self.length_m < WAYPOINT_SPACING_M:
            raise LatticeError("section shorter than one waypoint")
        if self.start_m < 0 or self.depth < 0:
            raise LatticeError("negative section start or depth")

    @property
    def length_m(self) -> int:
        return self.end_m - self.start_m

    @property
    def key(self) -> str:
        return f"{self.start_m}-{self.end_m}-d{self.depth}"


def top_level_sections(lattice: RouteLattice) -> list[Section]:
    """1600 m sections at 800 m stride, plus the final 1600 m snapped down to the
    grid if it is not already covered."""
    length = lattice.length_m
    if length < TOP_SECTION_LENGTH_M:
        raise LatticeError("route too short")
    sections = []
    start = 0
    while start + TOP_SECTION_LENGTH_M <= length:
        sections.append(Section(start, start + TOP_SECTION_LENGTH_M, 0))
        start += TOP_SECTION_STRIDE_M
    last_start = (length - TOP_SECTION_LENGTH_M) // WAYPOINT_SPACING_M * WAYPOINT_SPACING_M
    last = Section(last_start, last_start + TOP_SECTION_LENGTH_M, 0)
    if all((s.start_m, s.end_m) != (last.start_m, last.end_m) for s in sections):
        sections.append(last)
    return sorted(sections)


def subdivide(section: Section) -> tuple[Section, Section, Section]:
    """First, middle, and last halves (50% size, 25% stride), boundaries snapped
    to the 5 m grid."""
    if section.length_m < 2 * WAYPOINT_SPACING_M:
        raise LatticeError("section not divisible")
    a, length = section.start_m, section.length_m
    half = _snap(length // 2)
    quarter = _snap(length // 4)
    depth = section.depth + 1
    return (
        Section(a, a + half, depth),
        Section(a + quarter, a + quarter + half, depth),
        Section(a + length - half, a + length, depth),
    )


def _snap(meters: int) -> int:
    return meters // WAYPOINT_SPACING_M * WAYPOINT_SPACING_M


def clip_session(session: Session, section: Section) -> MultiChannelSeries:
    """Contiguous frames whose dist_m lies in [start_m, end_m); may be empty."""
    dist = session.dist_m
    if np.any(np.diff(dist) < 0):
        raise LatticeError("distance not monotone")
    lo = int(np.searchsorted(dist, section.start_m, side="left"))
    hi = int(np.searchsorted(dist, section.end_m, side="left"))
    return session.series.slice(lo, hi)


def waypoints_of(section: Section, lattice: RouteLattice) -> frozenset[int]:
    """Waypoint indices whose distance lies in [start_m, end_m)."""
    if section.start_m < 0 or section.end_m > lattice.length_m:
        raise LatticeError("section outside lattice bounds")
    return frozenset(
        range(section.start_m // WAYPOINT_SPACING_M, section.end_m // WAYPOINT_SPACING_M)
    )


def write_route_json(path: str | Path, lattice: RouteLattice) -> None:
    doc = {
        "route_id": lattice.route_id,
        "length_m": lattice.length_m,
        "events": [
            {"name": ev.name, "start_m": ev.start_m, "end_m": ev.end_m}
            for ev in lattice.events
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_route_json(path: str | Path) -> RouteLattice:
    doc = json.loads(Path(path).read_text())
    events = tuple(
        RouteEvent(ev["name"], int(ev["start_m"]), int(ev["end_m"]))
        for ev in doc["events"]
    )
    return RouteLattice(doc["route_id"], int(doc["length_m"]), events)
