"""Synthetic cohort generator: cohort shape, determinism, and signal placement."""

import numpy as np
import pytest

from isr.lattice import top_level_sections
from isr.synth import (
    CohortConfig,
    ConfigError,
    EventConfig,
    RouteConfig,
    default_config,
    generate_cohort,
    ground_truth_waypoints,
    ingest_session,
    load_cohort,
)

from conftest import tiny_config


class TestConfigs:
    def test_default_fixture_shape(self):
        config = default_config()
        assert len(config.routes) == 4
        assert all(len(r.events) == 3 for r in config.routes)
        assert all(ev.end_m - ev.start_m == 400 for r in config.routes for ev in r.events)
        assert config.participants_per_class == 15
        assert config.dropped_sessions == (("e15", "drive_3", "delayed"),)
        lattices = [r.lattice() for r in config.routes]
        assert sum(len(top_level_sections(lat)) for lat in lattices) == 31

    def test_default_fixture_session_count(self):
        # 15 control + 2x15 experimental sessions per route, minus one drop.
        _, sessions = generate_cohort(default_config(), ["drive_3"])
        assert len(sessions) == 44
        dropped = {(s.participant_id, s.route_id, s.label) for s in sessions}
        assert ("e15", "drive_3", "DELAYED") not in dropped

    def test_validation(self):
        with pytest.raises(ConfigError):
            EventConfig("e", 500, 400)
        with pytest.raises(ConfigError):
            RouteConfig("r", 800)
        with pytest.raises(ConfigError):
            CohortConfig(routes=(), participants_per_class=3)

    def test_json_round_trip(self):
        config = default_config(seed=9)
        assert CohortConfig.from_json_dict(config.to_json_dict()) == config

    def test_ground_truth_waypoints(self):
        config = tiny_config()
        assert ground_truth_waypoints(config, "route_a") == frozenset(range(160, 240))
        null = tiny_config(effect_size=0.0)
        assert ground_truth_waypoints(null, "route_a") == frozenset()


class TestGeneratedSessions:
    def test_cohort_shape(self, tiny_cohort):
        _, _, sessions = tiny_cohort
        assert len(sessions) == 15
        labels = [s.label for s in sessions]
        assert labels.count("CONTROL") == 5
        assert labels.count("REGULATED") == 5
        assert labels.count("DELAYED") == 5
        assert len({s.session_id for s in sessions}) == 15

    def test_distance_is_monotone_and_covers_route(self, tiny_cohort):
        config, _, sessions = tiny_cohort
        length = config.routes[0].length_m
        for session in sessions:
            dist = session.dist_m
            assert np.all(np.diff(dist) > 0)
            assert dist[0] >= 0.0
            assert dist[-1] >= length - 20.0

    def test_ingest_rate(self, tiny_cohort):
        _, _, sessions = tiny_cohort
        assert all(s.series.rate_hz == 10.0 for s in sessions)

    def test_channels_finite(self, tiny_cohort):
        _, _, sessions = tiny_cohort
        for session in sessions:
            assert np.all(np.isfinite(session.series.values))


class TestDeterminism:
    def test_same_seed_identical(self):
        _, first = generate_cohort(tiny_config(seed=3))
        _, second = generate_cohort(tiny_config(seed=3))
        for a, b in zip(first, second):
            assert a.session_id == b.session_id
            np.testing.assert_array_equal(a.series.values, b.series.values)
            np.testing.assert_array_equal(a.dist_m, b.dist_m)

    def test_different_seed_differs(self):
        _, first = generate_cohort(tiny_config(seed=3))
        _, second = generate_cohort(tiny_config(seed=4))
        assert not np.array_equal(first[0].series.values, second[0].series.values)


class TestSignalPlacement:
    def test_controls_untouched_by_effect_size(self):
        """The planted effect modifies experimental conditions only."""
        _, with_effect = generate_cohort(tiny_config(seed=2, effect_size=1.0))
        _, without = generate_cohort(tiny_config(seed=2, effect_size=0.0))
        for a, b in zip(with_effect, without):
            if a.label == "CONTROL":
                np.testing.assert_array_equal(a.series.values, b.series.values)

    def test_effect_confined_to_events(self):
        """Outside every event, experimental telemetry is independent of the
        effect size frame by frame."""
        config = tiny_config(seed=2, effect_size=1.0)
        _, with_effect = generate_cohort(config)
        _, without = generate_cohort(tiny_config(seed=2, effect_size=0.0))
        event = config.routes[0].events[0]
        for a, b in zip(with_effect, without):
            outside = (a.dist_m < event.start_m) | (a.dist_m >= event.end_m)
            np.testing.assert_array_equal(
                a.series.values[outside], b.series.values[outside]
            )
            if a.label != "CONTROL":
                inside = ~outside
                assert not np.array_equal(a.series.values[inside], b.series.values[inside])


class TestCohortIo:
    def test_write_then_load(self, tiny_cohort_dir):
        config, lattices, sessions = load_cohort(tiny_cohort_dir)
        assert config == tiny_config()
        assert len(lattices) == 1
        assert len(sessions) == 15
        assert all(s.series.rate_hz == 10.0 for s in sessions)

    def test_route_filter(self, tiny_cohort_dir):
        _, lattices, sessions = load_cohort(tiny_cohort_dir, ["nope"])
        assert lattices == [] and sessions == []

    def test_loaded_matches_generated(self, tiny_cohort_dir, tiny_cohort):
        _, _, generated = tiny_cohort
        _, _, loaded = load_cohort(tiny_cohort_dir)
        by_id = {s.session_id: s for s in loaded}
        sample = generated[0]
        np.testing.assert_allclose(
            by_id[sample.session_id].series.values, sample.series.values, atol=1e-4
        )


def test_ingest_downsamples_by_six():
    _, sessions = generate_cohort(tiny_config())
    raw = sessions[0]
    ingested = ingest_session(raw)
    assert ingested.series.rate_hz == 10.0
    assert ingested.series.frame_count == -(-raw.series.frame_count // 6)
