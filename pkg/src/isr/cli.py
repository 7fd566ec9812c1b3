"""Operator entry point binding the pipeline: generate, clip, compare,
evaluate, grid-search, benchmark, and score recovery.

All configuration files are JSON; every stochastic step derives from the
single ``--seed`` flag.  Exit codes: 0 success, 2 configuration error,
3 data error, 4 plugin failure.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click

from isr import bench as bench_mod
from isr import engine, metrics, synth
from isr.classifiers import (
    KIND_KNN,
    KIND_LOGREG,
    KIND_PLUGIN,
    ClassifierError,
    ModuleSpec,
    PluginError,
    plugin_command,
)
from isr.lattice import LatticeError, Section, subdivide, top_level_sections
from isr.series import SeriesError
from isr.similarity import (
    SimilarityError,
    SimilaritySpec,
    write_compare_log,
    write_matrix_csv,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PLUGIN = 4

_CONFIG_ERRORS = (
    synth.ConfigError,
    engine.EngineError,
    ClassifierError,
    SimilarityError,
    LatticeError,
    SeriesError,
    bench_mod.BenchError,
)
_DATA_ERRORS = (FileNotFoundError, NotADirectoryError, KeyError, StopIteration)


def _exit_codes(func):
    """Translate library exceptions into the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PluginError as exc:
            click.echo(f"error: plugin failure: {exc}", err=True)
            sys.exit(EXIT_PLUGIN)
        except _CONFIG_ERRORS as exc:
            click.echo(f"error: invalid configuration: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except json.JSONDecodeError as exc:
            click.echo(f"error: malformed JSON: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except _DATA_ERRORS as exc:
            click.echo(f"error: bad or missing data: {exc}", err=True)
            sys.exit(EXIT_DATA)

    return wrapper


def _load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def params_from_json_dict(doc: dict) -> engine.IsrParams:
    """Build one grid point from a JSON parameter document.

    Recognized keys: ``classifier`` (KNN | LOGREG | PLUGIN), ``similarity``
    (e.g. "DTW", "SC_DTW:5"), ``k``, ``l2_lambda``, ``learning_rate``,
    ``iterations``, ``max_depth``, ``threshold``, ``paradigm``.
    """
    kind = str(doc.get("classifier", KIND_KNN)).upper()
    if kind not in (KIND_KNN, KIND_LOGREG, KIND_PLUGIN):
        raise ClassifierError(f"unknown classifier kind {kind!r}")
    similarity = None
    if kind != KIND_PLUGIN:
        similarity = SimilaritySpec.parse(str(doc.get("similarity", "DTW")))
    spec = ModuleSpec(
        kind,
        similarity=similarity,
        k=int(doc.get("k", 1)),
        l2_lambda=float(doc.get("l2_lambda", 1e-3)),
        learning_rate=float(doc.get("learning_rate", 1e-2)),
        iterations=int(doc.get("iterations", 500)),
    )
    return engine.IsrParams(
        module_spec=spec,
        max_depth=int(doc.get("max_depth", 1)),
        threshold=float(doc.get("threshold", 0.0)),
        paradigm=str(doc.get("paradigm", engine.PARADIGM_ANY)).upper(),
    )


def _route_data(cohort_dir: str, route_id: str) -> tuple[synth.CohortConfig, engine.RouteData]:
    config, lattices, sessions = synth.load_cohort(cohort_dir, [route_id])
    if not lattices:
        raise FileNotFoundError(f"route {route_id!r} not in cohort {cohort_dir!r}")
    return config, engine.RouteData(lattices[0], sessions)


def _sections_at_depth(lattice, depth: int) -> list[Section]:
    sections = top_level_sections(lattice)
    for _ in range(depth):
        sections = [child for s in sections for child in subdivide(s)]
    return sections


@click.group()
def main() -> None:
    """Section-reduction pipeline tools."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Cohort config JSON; defaults to the built-in fixture.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--effect-size", type=float, default=1.0, show_default=True,
              help="Planted effect size for the default fixture.")
@_exit_codes
def synth_cmd(config_path: str | None, out_dir: str, seed: int, effect_size: float) -> None:
    """Generate a cohort of driving sessions."""
    if config_path is None:
        config = synth.default_config(seed=seed, effect_size=effect_size)
    else:
        config = synth.CohortConfig.from_json_dict(_load_json(config_path))
    manifest_path = synth.write_cohort(config, out_dir)
    manifest = _load_json(manifest_path)
    click.echo(
        f"wrote {len(manifest['sessions'])} sessions over "
        f"{len(manifest['routes'])} routes to {out_dir}"
    )


main.add_command(synth_cmd, name="synth")


@main.command("simmat")
@click.option("--cohort", "cohort_dir", type=click.Path(), required=True)
@click.option("--route", "route_id", default=None,
              help="Restrict to one route; default all routes.")
@click.option("--section-depth", type=int, default=0, show_default=True)
@click.option("--spec", "spec_text", default="DTW", show_default=True,
              help="Similarity function, KIND[:RADIUS].")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_exit_codes
def simmat_cmd(cohort_dir: str, route_id: str | None, section_depth: int,
               spec_text: str, out_dir: str) -> None:
    """Write per-section similarity matrices and a comparison log."""
    if section_depth < 0:
        raise engine.EngineError("section depth must be >= 0")
    spec = SimilaritySpec.parse(spec_text)
    routes = None if route_id is None else [route_id]
    _, lattices, sessions = synth.load_cohort(cohort_dir, routes)
    if not lattices:
        raise FileNotFoundError(f"no matching routes in cohort {cohort_dir!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_matrices = 0
    records = []
    from isr.similarity import build_similarity_matrix

    for lattice in lattices:
        data = engine.RouteData(lattice, sessions)
        for section in _sections_at_depth(lattice, section_depth):
            clips = data.clips_1hz(section)
            ids = data.session_ids
            matrix = build_similarity_matrix(
                [clips[i] for i in ids], ids, spec, section, records=records
            )
            write_matrix_csv(out / f"{lattice.route_id}_{section.key}.csv", matrix)
            n_matrices += 1
    write_compare_log(out / "compare_log.csv", records)
    click.echo(f"wrote {n_matrices} matrices and {len(records)} comparisons to {out_dir}")


@main.command("evaluate")
@click.option("--cohort", "cohort_dir", type=click.Path(), required=True)
@click.option("--route", "route_id", required=True)
@click.option("--params", "params_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_exit_codes
def evaluate_cmd(cohort_dir: str, route_id: str, params_path: str,
                 seed: int, jobs: int, out_path: str) -> None:
    """Five-fold evaluation of one parameterization on one route."""
    if jobs < 1:
        raise engine.EngineError("--jobs must be >= 1")
    params = params_from_json_dict(_load_json(params_path))
    _, data = _route_data(cohort_dir, route_id)
    report, _ = engine.evaluate_route(data, params, seed=seed, jobs=jobs)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    engine.write_reports_csv(out, [report])
    key = f"{params.similarity_label}|{params.module_spec.label}|{params.paradigm}|" \
          f"{params.max_depth}|{params.threshold:.2f}"
    engine.write_footprints_json(
        out.with_suffix(".footprints.json"), {key: report.footprints}
    )
    click.echo(
        f"route={route_id} acc={metrics.render(report.accuracy)} "
        f"jiwe={metrics.render(report.jiwe)} modules={report.n_modules}"
    )


@main.command("grid")
@click.option("--cohort", "cohort_dir", type=click.Path(), required=True)
@click.option("--route", "route_id", required=True)
@click.option("--grid", "grid_name", type=click.Choice(["full", "small"]),
              default="small", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--enumerate-only", is_flag=True,
              help="List the grid points without evaluating them.")
@_exit_codes
def grid_cmd(cohort_dir: str, route_id: str, grid_name: str, seed: int,
             jobs: int, out_path: str, enumerate_only: bool) -> None:
    """Rank every grid configuration on one route."""
    if jobs < 1:
        raise engine.EngineError("--jobs must be >= 1")
    if grid_name == "full":
        sim_points = engine.similarity_grid()
        plugin_points = engine.plugin_grid()
    else:
        sim_points = engine.small_grid(include_plugin=False)
        plugin_points = [p for p in engine.small_grid(include_plugin=True)
                         if p.module_spec.classifier_kind == KIND_PLUGIN]
    if enumerate_only:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["track", "similarity", "module", "paradigm",
                             "max_depth", "threshold"])
            for track, points in (("similarity", sim_points), ("plugin", plugin_points)):
                for p in points:
                    writer.writerow([
                        track, p.similarity_label, p.module_spec.label,
                        p.paradigm, p.max_depth, f"{p.threshold:.2f}",
                    ])
        click.echo(
            f"{len(sim_points)} similarity configurations, "
            f"{len(plugin_points)} plugin configurations"
        )
        return
    points = list(sim_points)
    if plugin_command() is not None:
        points.extend(plugin_points)
    _, data = _route_data(cohort_dir, route_id)
    ranked = engine.grid_search(data, points, seed=seed, jobs=jobs)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    engine.write_reports_csv(out, [report for _, report in ranked])
    best_params, best = ranked[0]
    click.echo(
        f"evaluated {len(ranked)} configurations; best "
        f"{best_params.similarity_label}/{best_params.module_spec.label} "
        f"acc={metrics.render(best.accuracy)}"
    )


@main.command("bench")
@click.option("--corpus", type=click.Choice(["auto"]), default="auto", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pairs-per-bucket", type=int, default=4, show_default=True)
@click.option("--max-bucket", type=int, default=3200, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_exit_codes
def bench_cmd(corpus: str, seed: int, pairs_per_bucket: int,
              max_bucket: int, out_dir: str) -> None:
    """Time the similarity kernels and measure approximation error."""
    buckets = tuple(b for b in bench_mod.DEFAULT_LENGTH_BUCKETS if b <= max_bucket)
    pairs = bench_mod.make_corpus(seed, buckets, pairs_per_bucket)
    records = bench_mod.run_benchmark(pairs)
    ttc_path, err_path = bench_mod.write_bench_csvs(out_dir, records)
    click.echo(f"wrote {ttc_path} and {err_path} ({len(records)} comparisons)")


@main.command("recover")
@click.option("--results", "results_path", type=click.Path(), required=True)
@click.option("--truth", "truth_path", type=click.Path(), required=True,
              help="Cohort manifest or cohort config JSON.")
@click.option("--route", "route_id", default=None,
              help="Restrict to one route's rows.")
@click.option("--acc-min", type=float, default=0.55, show_default=True)
@click.option("--jiwe-min", type=float, default=0.5, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@_exit_codes
def recover_cmd(results_path: str, truth_path: str, route_id: str | None,
                acc_min: float, jiwe_min: float, out_path: str | None) -> None:
    """Score planted-event recovery from a grid or evaluation results CSV."""
    truth_doc = _load_json(truth_path)
    config = synth.CohortConfig.from_json_dict(truth_doc.get("config", truth_doc))
    planted = {
        r.route_id: synth.ground_truth_waypoints(config, r.route_id)
        for r in config.routes
    }
    with open(results_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise engine.EngineError(f"no result rows in {results_path!r}")
    scored = []
    for row in rows:
        route = row["route"]
        if route_id is not None and route != route_id:
            continue
        if route not in planted:
            raise engine.EngineError(f"route {route!r} not in truth config")
        acc = float(row["acc"])
        jiwe_val = float(row["jiwe"])
        recovered = acc >= acc_min and jiwe_val >= jiwe_min
        scored.append((row, acc, jiwe_val, recovered))
    if not scored:
        raise engine.EngineError("no result rows match the requested route")
    n_pass = sum(1 for _, _, _, ok in scored if ok)
    for row, acc, jiwe_val, ok in scored:
        click.echo(
            f"{row['route']} {row['similarity']}/{row['module']}/{row['paradigm']}"
            f"/d{row['max_depth']}/t{row['threshold']}: "
            f"acc={acc:.4f} jiwe={jiwe_val:.4f} "
            f"{'RECOVERED' if ok else 'not recovered'}"
        )
    if out_path is not None:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["route", "similarity", "module", "paradigm",
                             "max_depth", "threshold", "acc", "jiwe", "recovered"])
            for row, acc, jiwe_val, ok in scored:
                writer.writerow([
                    row["route"], row["similarity"], row["module"], row["paradigm"],
                    row["max_depth"], row["threshold"],
                    f"{acc:.4f}", f"{jiwe_val:.4f}", int(ok),
                ])
    click.echo(f"{n_pass}/{len(scored)} configurations recovered the planted events")


if __name__ == "__main__":
    main()
