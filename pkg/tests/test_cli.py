"""End-to-end CLI behavior: happy paths, exit codes, idempotence."""

import csv
import json

import pytest
from click.testing import CliRunner

from conftest import tiny_config
from isr.cli import main

PARAMS = {
    "classifier": "KNN",
    "similarity": "FAST_DTW:1",
    "max_depth": 2,
    "threshold": 0.0,
    "paradigm": "ALL",
}


@pytest.fixture()
def runner():
    return CliRunner()


class TestSynth:
    def test_custom_config(self, runner, tmp_path):
        config_path = tmp_path / "cohort.json"
        config_path.write_text(json.dumps(tiny_config().to_json_dict()))
        out = tmp_path / "cohort"
        result = runner.invoke(main, ["synth", "--config", str(config_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["sessions"]) == 15

    def test_malformed_config_is_config_error(self, runner, tmp_path):
        config_path = tmp_path / "bad.json"
        config_path.write_text(json.dumps({"routes": []}))
        result = runner.invoke(main, ["synth", "--config", str(config_path), "--out", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_missing_config_file_is_data_error(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "x")])
        assert result.exit_code == 3


class TestSimmat:
    def test_writes_matrices_and_log(self, runner, tiny_cohort_dir, tmp_path):
        out = tmp_path / "mats"
        result = runner.invoke(main, [
            "simmat", "--cohort", str(tiny_cohort_dir), "--section-depth", "0",
            "--spec", "FAST_DTW:1", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        matrices = sorted(p.name for p in out.glob("route_a_*.csv"))
        assert len(matrices) == 3  # 3200 m route -> 3 top-level sections
        assert (out / "compare_log.csv").exists()
        with open(out / matrices[0], newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 16  # header + 15 sessions

    def test_bad_spec_is_config_error(self, runner, tiny_cohort_dir, tmp_path):
        result = runner.invoke(main, [
            "simmat", "--cohort", str(tiny_cohort_dir), "--spec", "WAT",
            "--out", str(tmp_path / "m"),
        ])
        assert result.exit_code == 2


class TestEvaluate:
    def test_report_and_footprints(self, runner, tiny_cohort_dir, tmp_path):
        params_path = tmp_path / "params.json"
        params_path.write_text(json.dumps(PARAMS))
        out = tmp_path / "report.csv"
        result = runner.invoke(main, [
            "evaluate", "--cohort", str(tiny_cohort_dir), "--route", "route_a",
            "--params", str(params_path), "--seed", "1", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert rows[0]["route"] == "route_a"
        assert 0.0 <= float(rows[0]["acc"]) <= 1.0
        sidecar = json.loads(out.with_suffix(".footprints.json").read_text())
        assert len(sidecar) == 1

    def test_idempotent_byte_identical(self, runner, tiny_cohort_dir, tmp_path):
        params_path = tmp_path / "params.json"
        params_path.write_text(json.dumps(PARAMS))
        blobs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            result = runner.invoke(main, [
                "evaluate", "--cohort", str(tiny_cohort_dir), "--route", "route_a",
                "--params", str(params_path), "--seed", "7", "--out", str(out),
            ])
            assert result.exit_code == 0, result.output
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_unknown_route_is_data_error(self, runner, tiny_cohort_dir, tmp_path):
        params_path = tmp_path / "params.json"
        params_path.write_text(json.dumps(PARAMS))
        result = runner.invoke(main, [
            "evaluate", "--cohort", str(tiny_cohort_dir), "--route", "nope",
            "--params", str(params_path), "--out", str(tmp_path / "r.csv"),
        ])
        assert result.exit_code == 3


class TestGrid:
    def test_enumerate_full(self, runner, tiny_cohort_dir, tmp_path):
        out = tmp_path / "enum.csv"
        result = runner.invoke(main, [
            "grid", "--cohort", str(tiny_cohort_dir), "--route", "route_a",
            "--grid", "full", "--enumerate-only", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert "2640 similarity configurations" in result.output
        assert "88 plugin configurations" in result.output
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert sum(1 for r in rows if r["track"] == "similarity") == 2640
        assert sum(1 for r in rows if r["track"] == "plugin") == 88

    def test_small_grid_runs(self, runner, tiny_cohort_dir, tmp_path):
        out = tmp_path / "results.csv"
        result = runner.invoke(main, [
            "grid", "--cohort", str(tiny_cohort_dir), "--route", "route_a",
            "--grid", "small", "--seed", "0", "--jobs", "2", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 32
        accs = [float(r["acc"]) for r in rows]
        assert accs == sorted(accs, reverse=True)


class TestBench:
    def test_writes_csvs(self, runner, tmp_path):
        out = tmp_path / "bench"
        result = runner.invoke(main, [
            "bench", "--out", str(out), "--max-bucket", "50",
            "--pairs-per-bucket", "1",
        ])
        assert result.exit_code == 0, result.output
        assert (out / "bench_ttc.csv").exists()
        assert (out / "bench_error.csv").exists()


class TestRecover:
    def _results(self, tmp_path, runner, tiny_cohort_dir):
        params_path = tmp_path / "params.json"
        params_path.write_text(json.dumps(PARAMS))
        out = tmp_path / "report.csv"
        result = runner.invoke(main, [
            "evaluate", "--cohort", str(tiny_cohort_dir), "--route", "route_a",
            "--params", str(params_path), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        return out

    def test_scores_rows(self, runner, tiny_cohort_dir, tmp_path):
        results = self._results(tmp_path, runner, tiny_cohort_dir)
        out = tmp_path / "recovery.csv"
        result = runner.invoke(main, [
            "recover", "--results", str(results),
            "--truth", str(tiny_cohort_dir / "manifest.json"), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert rows[0]["recovered"] in ("0", "1")

    def test_unknown_route_rejected(self, runner, tiny_cohort_dir, tmp_path):
        results = self._results(tmp_path, runner, tiny_cohort_dir)
        result = runner.invoke(main, [
            "recover", "--results", str(results),
            "--truth", str(tiny_cohort_dir / "manifest.json"), "--route", "nope",
        ])
        assert result.exit_code == 2
