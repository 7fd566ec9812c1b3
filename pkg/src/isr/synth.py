"""Seeded generator of routes, scripted events, and class-conditional driver
sessions standing in for the unavailable clinical recordings.

Sessions are produced at 60 Hz and are meant to be ingested through the real
PAA path down to 10 Hz.  Every planted event is a scripted manoeuvre all
drivers steer through; for a positive effect size the classes differ in how
they handle its onset (delayed drivers overshoot, regulated drivers
micro-correct), scaled by the event's effect size.  Outside events all
classes are identically distributed: each session only carries a
class-independent low-frequency spatial drift, assigned in mixed-label
style groups so that drift similarity is deliberately uninformative about
the label."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from isr.lattice import RouteEvent, RouteLattice, write_route_json
from isr.series import (
    CHANNEL_NAMES,
    MultiChannelSeries,
    Session,
    paa_downsample,
    write_session_csv,
)

MPS_TO_MPH = 2.2369362920544


class ConfigError(ValueError):
    """Raised for invalid cohort configurations."""


@dataclass(frozen=True)
class EventConfig:
    name: str
    start_m: int
    end_m: int
    effect_size: float = 1.0

    def __post_init__(self):
        if self.end_m <= self.start_m or self.effect_size < 0:
            raise ConfigError(f"bad event {self.name}")


@dataclass(frozen=True)
class RouteConfig:
    route_id: str
    length_m: int
    events: tuple[EventConfig, ...] = ()

    def __post_init__(self):
        if self.length_m < 1600:
            raise ConfigError("route shorter than one top-level section")

    def lattice(self) -> RouteLattice:
        return RouteLattice(
            self.route_id,
            self.length_m,
            tuple(RouteEvent(ev.name, ev.start_m, ev.end_m) for ev in self.events),
        )


@dataclass(frozen=True)
class CohortConfig:
    routes: tuple[RouteConfig, ...]
    participants_per_class: int = 15
    base_rate_hz: float = 60.0
    noise_scale: float = 1.0
    style_scale: float = 1.0
    seed: int = 0
    # (participant_id, route_id, condition) triples to discard after generation.
    dropped_sessions: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        if not self.routes or self.participants_per_class < 1 or self.base_rate_hz <= 0:
            raise ConfigError("invalid cohort config")

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "participants_per_class": self.participants_per_class,
            "base_rate_hz": self.base_rate_hz,
            "noise_scale": self.noise_scale,
            "style_scale": self.style_scale,
            "dropped_sessions": [list(t) for t in self.dropped_sessions],
            "routes": [
                {
                    "route_id": r.route_id,
                    "length_m": r.length_m,
                    "events": [
                        {
                            "name": ev.name,
                            "start_m": ev.start_m,
                            "end_m": ev.end_m,
                            "effect_size": ev.effect_size,
                        }
                        for ev in r.events
                    ],
                }
                for r in self.routes
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CohortConfig":
        routes = tuple(
            RouteConfig(
                r["route_id"],
                int(r["length_m"]),
                tuple(
                    EventConfig(
                        ev["name"],
                        int(ev["start_m"]),
                        int(ev["end_m"]),
                        float(ev.get("effect_size", 1.0)),
                    )
                    for ev in r.get("events", ())
                ),
            )
            for r in doc["routes"]
        )
        return cls(
            routes=routes,
            participants_per_class=int(doc.get("participants_per_class", 15)),
            base_rate_hz=float(doc.get("base_rate_hz", 60.0)),
            noise_scale=float(doc.get("noise_scale", 1.0)),
            style_scale=float(doc.get("style_scale", 1.0)),
            seed=int(doc.get("seed", 0)),
            dropped_sessions=tuple(
                tuple(t) for t in doc.get("dropped_sessions", ())
            ),
        )


def default_config(seed: int = 0, effect_size: float = 1.0) -> CohortConfig:
    """The standard study-shaped fixture: 30 participants, 4 routes totalling 31
    top-level sections, 179 sessions after one delayed Drive-3 drop, and three
    planted 400 m events per route."""

    def events(positions: tuple[int, ...]) -> tuple[EventConfig, ...]:
        return tuple(
            EventConfig(f"event_{i + 1}", p, p + 400, effect_size)
            for i, p in enumerate(positions)
        )

    routes = (
        RouteConfig("drive_1", 6400, events((800, 2800, 4800))),
        RouteConfig("drive_2", 7200, events((1200, 3600, 5600))),
        RouteConfig("drive_3", 7200, events((800, 3200, 6000))),
        RouteConfig("drive_4", 7200, events((1600, 4000, 6400))),
    )
    return CohortConfig(
        routes=routes,
        seed=seed,
        dropped_sessions=(("e15", "drive_3", "delayed"),),
    )


CONDITION_LABEL = {
    "control": "CONTROL",
    "regulated": "REGULATED",
    "delayed": "DELAYED",
}


def _ar1(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    """Stationary unit-variance AR(1) noise."""
    from scipy.signal import lfilter

    w = rng.normal(size=n) * math.sqrt(1.0 - rho * rho)
    w[0] /= math.sqrt(1.0 - rho * rho)
    return lfilter([1.0], [1.0, -rho], w)


@dataclass(frozen=True)
class _Style:
    """Per-session, class-independent spatial drift habits."""

    steer_amp: float
    steer_wavelength: float
    steer_phase: float
    lane_amp: float
    lane_wavelength: float
    lane_phase: float
    heading_amp: float
    heading_wavelength: float
    heading_phase: float
    throttle_amp: float
    throttle_wavelength: float
    throttle_phase: float


def _style_group(config: CohortConfig, participant_index: int, condition: str) -> int:
    """Index of the drift-style group a session belongs to.

    Sessions share drift styles in groups of three holding exactly one
    session of each condition, drawn from three different participants — a
    deliberately adversarial nuisance structure: a session's nearest drift
    neighbours always carry the other two labels.  Every group is built the
    same way from each class, so the assignment is class-independent."""
    n = config.participants_per_class
    i = participant_index % n
    if condition == "delayed":
        return (i - 1) % n
    return i


def _session_style(config: CohortConfig, participant_index: int, condition: str) -> _Style:
    group = _style_group(config, participant_index, condition)
    rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, 0xA11CE, group])
    )
    cond_offset = ("control", "regulated", "delayed").index(condition)
    jitter = np.random.default_rng(
        np.random.SeedSequence([config.seed, 0xB1A5, participant_index, cond_offset])
    )
    return _Style(
        steer_amp=config.style_scale * rng.uniform(4.2, 6.6) * (1.0 + 0.02 * jitter.normal()),
        steer_wavelength=rng.uniform(220.0, 480.0) + 1.0 * jitter.normal(),
        steer_phase=rng.uniform(0.0, 2.0 * math.pi) + 0.03 * jitter.normal(),
        lane_amp=config.style_scale * rng.uniform(1.5, 2.7) * (1.0 + 0.02 * jitter.normal()),
        lane_wavelength=rng.uniform(220.0, 480.0) + 1.0 * jitter.normal(),
        lane_phase=rng.uniform(0.0, 2.0 * math.pi) + 0.03 * jitter.normal(),
        heading_amp=config.style_scale * rng.uniform(1.8, 3.3) * (1.0 + 0.02 * jitter.normal()),
        heading_wavelength=rng.uniform(220.0, 480.0) + 1.0 * jitter.normal(),
        heading_phase=rng.uniform(0.0, 2.0 * math.pi) + 0.03 * jitter.normal(),
        throttle_amp=config.style_scale * rng.uniform(10.6, 19.6) * (1.0 + 0.02 * jitter.normal()),
        throttle_wavelength=rng.uniform(220.0, 480.0) + 1.0 * jitter.normal(),
        throttle_phase=rng.uniform(0.0, 2.0 * math.pi) + 0.03 * jitter.normal(),
    )


ONSET_LENGTH_M = 200.0


def _onset_response(condition: str, effect: float, u: np.ndarray) -> dict[str, np.ndarray]:
    """Class-conditional manoeuvre-onset signature on u in [0, 1).

    Delayed drivers overshoot entering the manoeuvre (a single broad
    excursion); regulated drivers micro-correct (a faster oscillation);
    controls enter it cleanly.  The two shapes are orthogonal, so all three
    classes are mutually distant."""
    zero = np.zeros_like(u)
    if condition == "delayed":
        bump = np.sin(math.pi * u) * effect
        return {
            "steering": 18.0 * bump,
            "lane": 2.6 * bump,
            "heading": 7.0 * bump,
            "throttle": 26.0 * bump,
            "brake": 42.0 * np.maximum(np.sin(math.pi * u + math.pi / 2.0), 0.0) * effect,
        }
    if condition == "regulated":
        osc = np.sin(3.0 * math.pi * u) * effect
        return {
            "steering": 15.5 * osc,
            "lane": 2.2 * np.sin(3.0 * math.pi * u + math.pi / 4.0) * effect,
            "heading": 6.0 * osc,
            "throttle": 24.0 * np.sin(3.0 * math.pi * u + math.pi / 2.0) * effect,
            "brake": 36.0 * np.maximum(np.sin(3.0 * math.pi * u + math.pi), 0.0) * effect,
        }
    return {"steering": zero, "lane": zero, "heading": zero, "throttle": zero, "brake": zero}


def _generate_session(
    config: CohortConfig,
    route: RouteConfig,
    participant_id: str,
    participant_index: int,
    condition: str,
) -> Session:
    cond_index = ("control", "regulated", "delayed").index(condition)
    route_index = [r.route_id for r in config.routes].index(route.route_id)
    rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, 1, participant_index, route_index, cond_index])
    )
    rate = config.base_rate_hz
    mean_speed = rng.uniform(10.5, 16.5)  # m/s, ~23.5-37 mph

    # Integrate a smoothly varying speed profile until the route is covered.
    chunks = []
    total = 0.0
    last = None
    while total < route.length_m:
        n = int(route.length_m / mean_speed * rate * 1.3) + int(rate) * 30
        drift = _ar1(rng, n, 0.999)
        if last is not None:
            drift += last
        last = drift[-1]
        speed = np.clip(mean_speed * (1.0 + 0.06 * drift), 2.0, 45.0)
        chunks.append(speed)
        total += speed.sum() / rate
    speed = np.concatenate(chunks)
    dist = np.cumsum(speed) / rate
    n = int(np.searchsorted(dist, route.length_m, side="left"))
    speed = speed[:n]
    dist = dist[:n]

    noise = config.noise_scale
    style = _session_style(config, participant_index, condition)

    velocity = speed * MPS_TO_MPH + 0.3 * noise * _ar1(rng, n, 0.9)
    accel = np.gradient(velocity) * rate
    jerk = np.gradient(accel) * rate

    throttle = np.clip(
        25.0
        + 12.0 * _ar1(rng, n, 0.995)
        + 0.8 * accel
        + style.throttle_amp
        * np.sin(2.0 * math.pi * dist / style.throttle_wavelength + style.throttle_phase),
        0.0,
        100.0,
    )
    brake = np.clip(8.0 * _ar1(rng, n, 0.99) - 8.0, 0.0, 100.0)

    steer_noise = 2.0 * noise * _ar1(rng, n, 0.97)
    steering = steer_noise + style.steer_amp * np.sin(
        2.0 * math.pi * dist / style.steer_wavelength + style.steer_phase
    )
    lane = 0.5 * noise * _ar1(rng, n, 0.98) + style.lane_amp * np.sin(
        2.0 * math.pi * dist / style.lane_wavelength + style.lane_phase
    )
    heading = 1.5 * noise * _ar1(rng, n, 0.95) + style.heading_amp * np.sin(
        2.0 * math.pi * dist / style.heading_wavelength + style.heading_phase
    )

    for ev in route.events:
        mask = (dist >= ev.start_m) & (dist < ev.end_m)
        if not mask.any():
            continue
        # Scripted manoeuvre: every driver steers through the same curve, so
        # the event leaves a class-independent signature in all sessions.
        curve = 2.0 * math.pi * (dist[mask] - ev.start_m) / (ev.end_m - ev.start_m)
        steering[mask] += 6.0 * np.sin(curve)
        lane[mask] += 1.0 * np.sin(curve + math.pi / 4.0)
        heading[mask] += 2.4 * np.sin(curve + math.pi / 6.0)
        throttle[mask] += 9.0 * np.sin(curve + math.pi / 2.0)
        brake[mask] += 15.0 * np.maximum(np.sin(curve + math.pi), 0.0)
        if ev.effect_size <= 0:
            continue
        # Class-conditional handling while entering the manoeuvre.
        onset = mask & (dist < ev.start_m + ONSET_LENGTH_M)
        if onset.any():
            u = (dist[onset] - ev.start_m) / ONSET_LENGTH_M
            response = _onset_response(condition, ev.effect_size, u)
            steering[onset] += response["steering"]
            lane[onset] += response["lane"]
            heading[onset] += response["heading"]
            throttle[onset] += response["throttle"]
            brake[onset] += response["brake"]
        if condition == "delayed":
            steering[mask] += ev.effect_size * steer_noise[mask]  # variance x (1+d)
            lane[mask] += ev.effect_size * 1.0  # 1 ft bias per unit effect

    values = np.column_stack([throttle, brake, steering, velocity, jerk, lane, heading])
    series = MultiChannelSeries(values, rate, CHANNEL_NAMES)
    session_id = f"{participant_id}_{route.route_id}_{condition}"
    return Session(
        session_id=session_id,
        participant_id=participant_id,
        route_id=route.route_id,
        label=CONDITION_LABEL[condition],
        series=series,
        dist_m=dist,
    )


def generate_cohort(
    config: CohortConfig, route_ids: list[str] | None = None
) -> tuple[list[RouteLattice], list[Session]]:
    """All routes and 60 Hz sessions of the cohort, deterministic under seed.

    ``route_ids`` restricts generation to a subset of routes."""
    routes = [r for r in config.routes if route_ids is None or r.route_id in route_ids]
    lattices = [r.lattice() for r in routes]
    sessions: list[Session] = []
    n = config.participants_per_class
    participants = [(f"c{i + 1:02d}", i, ("control",)) for i in range(n)]
    participants += [
        (f"e{i + 1:02d}", n + i, ("regulated", "delayed")) for i in range(n)
    ]
    dropped = set(config.dropped_sessions)
    for route in routes:
        for pid, pindex, conditions in participants:
            for condition in conditions:
                if (pid, route.route_id, condition) in dropped:
                    continue
                sessions.append(
                    _generate_session(config, route, pid, pindex, condition)
                )
    return lattices, sessions


def ingest_session(session: Session, target_rate_hz: float = 10.0) -> Session:
    """PAA the raw 60 Hz recording (and its distance channel) down to 10 Hz."""
    factor = int(round(session.series.rate_hz / target_rate_hz))
    if factor < 1:
        raise ConfigError("target rate above recording rate")
    from isr.series import paa_array

    series = paa_downsample(session.series, factor)
    dist = paa_array(session.dist_m.reshape(-1, 1), factor)[:, 0]
    return Session(
        session.session_id,
        session.participant_id,
        session.route_id,
        session.label,
        series,
        dist,
    )


def ground_truth_waypoints(config: CohortConfig, route_id: str) -> frozenset[int]:
    """Waypoints of planted events with a positive effect size."""
    route = next(r for r in config.routes if r.route_id == route_id)
    out: set[int] = set()
    for ev in route.events:
        if ev.effect_size > 0:
            out.update(range(ev.start_m // 5, ev.end_m // 5))
    return frozenset(out)


def write_cohort(config: CohortConfig, out_dir: str | Path) -> Path:
    """Emit session CSVs, route JSONs, and the cohort manifest; returns the
    manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "sessions").mkdir(parents=True, exist_ok=True)
    (out_dir / "routes").mkdir(parents=True, exist_ok=True)
    lattices, sessions = generate_cohort(config)
    manifest = {
        "seed": config.seed,
        "rate_hz": config.base_rate_hz,
        "config": config.to_json_dict(),
        "routes": [],
        "sessions": [],
    }
    for lattice in lattices:
        rel = f"routes/{lattice.route_id}.json"
        write_route_json(out_dir / rel, lattice)
        manifest["routes"].append({"route_id": lattice.route_id, "path": rel})
    for session in sessions:
        rel = f"sessions/{session.session_id}.csv"
        write_session_csv(out_dir / rel, session)
        manifest["sessions"].append(
            {
                "session_id": session.session_id,
                "participant_id": session.participant_id,
                "route_id": session.route_id,
                "label": session.label,
                "path": rel,
            }
        )
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_cohort(
    cohort_dir: str | Path, route_ids: list[str] | None = None
) -> tuple[CohortConfig, list[RouteLattice], list[Session]]:
    """Read a written cohort back and ingest sessions to 10 Hz."""
    from isr.lattice import read_route_json
    from isr.series import read_session_csv

    cohort_dir = Path(cohort_dir)
    manifest = json.loads((cohort_dir / "manifest.json").read_text())
    config = CohortConfig.from_json_dict(manifest["config"])
    lattices = [
        read_route_json(cohort_dir / entry["path"])
        for entry in manifest["routes"]
        if route_ids is None or entry["route_id"] in route_ids
    ]
    sessions = []
    for entry in manifest["sessions"]:
        if route_ids is not None and entry["route_id"] not in route_ids:
            continue
        raw = read_session_csv(
            cohort_dir / entry["path"],
            entry["session_id"],
            entry["participant_id"],
            entry["route_id"],
            entry["label"],
            manifest["rate_hz"],
        )
        sessions.append(ingest_session(raw))
    return config, lattices, sessions
