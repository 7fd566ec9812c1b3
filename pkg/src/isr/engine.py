"""The iterative section reduction engine: recursive module harvesting,
paradigm filtering, threshold inheritance, ensemble voting, k-fold evaluation,
and the hyperparameter grid."""

from __future__ import annotations

import csv
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from isr import metrics
from isr.classifiers import (
    KIND_KNN,
    KIND_LOGREG,
    KIND_PLUGIN,
    ClassifierError,
    FailedModule,
    ModuleSpec,
    PluginError,
    PluginModule,
    TrainedModule,
    knn_train,
    logreg_train,
    majority_label,
    plugin_adapter,
)
from isr.lattice import (
    RouteLattice,
    Section,
    clip_session,
    subdivide,
    top_level_sections,
    waypoints_of,
)
from isr.series import Session, paa_array, z_normalize_array
from isr.similarity import (
    SimilarityMatrix,
    SimilaritySpec,
    all_specs,
    build_similarity_matrix,
)

PARADIGM_ANY = "ANY"
PARADIGM_ALL = "ALL"

MAX_DEPTH_GRID = (1, 2, 3, 4)
THRESHOLD_GRID = tuple(round(0.05 * i, 2) for i in range(11))
PARADIGM_GRID = (PARADIGM_ANY, PARADIGM_ALL)

PLUGIN_WINDOW_FRAMES = 30
PLUGIN_WINDOW_STRIDE = 15


class EngineError(ValueError):
    """Raised for invalid evaluation setups."""


@dataclass(frozen=True)
class FoldPlan:
    """Participant-level stratified fold assignment."""

    k: int
    assignments: tuple[tuple[str, int], ...]

    def fold_of(self, participant_id: str) -> int:
        for pid, fold in self.assignments:
            if pid == participant_id:
                return fold
        raise EngineError(f"participant {participant_id!r} not in fold plan")

    def as_dict(self) -> dict[str, int]:
        return dict(self.assignments)


def make_fold_plan(sessions: Sequence[Session], k: int, seed: int) -> FoldPlan:
    """Deterministic stratified grouping of participants into k folds; the
    strata are the control and experimental participant groups."""
    if k < 2:
        raise EngineError("need at least 2 folds")
    groups: dict[str, str] = {}
    for s in sessions:
        group = "control" if s.label == "CONTROL" else "experimental"
        groups.setdefault(s.participant_id, group)
        if groups[s.participant_id] != group and s.label != "CONTROL":
            groups[s.participant_id] = "experimental"
    if len(groups) < k:
        raise EngineError("fewer participants than folds")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D]))
    assignments: list[tuple[str, int]] = []
    for group in ("control", "experimental"):
        pids = sorted(pid for pid, g in groups.items() if g == group)
        rng.shuffle(pids)
        assignments.extend((pid, i % k) for i, pid in enumerate(pids))
    return FoldPlan(k, tuple(sorted(assignments)))


@dataclass(frozen=True)
class IsrParams:
    """One grid point: module family, recursion depth, inclusion threshold,
    and paradigm."""

    module_spec: ModuleSpec
    max_depth: int
    threshold: float
    paradigm: str

    def __post_init__(self):
        if self.max_depth < 1:
            raise EngineError("max_depth must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise EngineError("threshold must lie in [0, 1]")
        if self.paradigm not in (PARADIGM_ANY, PARADIGM_ALL):
            raise EngineError(f"unknown paradigm {self.paradigm!r}")

    @property
    def similarity_label(self) -> str:
        sim = self.module_spec.similarity
        return "-" if sim is None else sim.label


class RouteData:
    """Sessions of one route plus lazily cached per-section clips and
    similarity matrices (shared across folds and grid points)."""

    def __init__(self, lattice: RouteLattice, sessions: Sequence[Session]):
        self.lattice = lattice
        self.sessions = tuple(
            sorted(
                (s for s in sessions if s.route_id == lattice.route_id),
                key=lambda s: s.session_id,
            )
        )
        if not self.sessions:
            raise EngineError(f"no sessions for route {lattice.route_id}")
        self.by_id = {s.session_id: s for s in self.sessions}
        self.labels = {s.session_id: s.label for s in self.sessions}
        self._clips_1hz: dict[Section, dict[str, np.ndarray | None]] = {}
        self._clips_10hz: dict[Section, dict[str, np.ndarray]] = {}
        self._matrices: dict[tuple[Section, SimilaritySpec], SimilarityMatrix] = {}
        self._lock = threading.Lock()

    @property
    def session_ids(self) -> list[str]:
        return [s.session_id for s in self.sessions]

    def clips_1hz(self, section: Section) -> dict[str, np.ndarray | None]:
        """Per-session clip, PAA'd from 10 Hz to 1 Hz and z-normalized; None
        when the session never enters the section."""
        with self._lock:
            cached = self._clips_1hz.get(section)
        if cached is not None:
            return cached
        clips: dict[str, np.ndarray | None] = {}
        for s in self.sessions:
            clip = clip_session(s, section)
            if clip.frame_count == 0:
                clips[s.session_id] = None
                continue
            factor = max(1, int(round(clip.rate_hz)))
            reduced = paa_array(clip.values, factor)
            clips[s.session_id] = z_normalize_array(reduced)
        with self._lock:
            self._clips_1hz[section] = clips
        return clips

    def clips_10hz(self, section: Section) -> dict[str, np.ndarray]:
        """Raw 10 Hz clippings for the plugin track (possibly empty arrays)."""
        with self._lock:
            cached = self._clips_10hz.get(section)
        if cached is not None:
            return cached
        clips = {
            s.session_id: clip_session(s, section).values for s in self.sessions
        }
        with self._lock:
            self._clips_10hz[section] = clips
        return clips

    def matrix(self, section: Section, spec: SimilaritySpec) -> SimilarityMatrix:
        key = (section, spec)
        with self._lock:
            cached = self._matrices.get(key)
        if cached is not None:
            return cached
        clips = self.clips_1hz(section)
        ids = self.session_ids
        matrix = build_similarity_matrix([clips[i] for i in ids], ids, spec, section)
        with self._lock:
            self._matrices[key] = matrix
        return matrix


@dataclass
class Ensemble:
    """Modules harvested for one held-out evaluation fold, with the waypoint
    footprint their sections cover."""

    eval_fold: int
    modules: list[TrainedModule]
    footprint: frozenset[int]
    params: IsrParams
    fallback_label: str

    def to_json_dict(self) -> dict:
        return {
            "eval_fold": self.eval_fold,
            "fallback_label": self.fallback_label,
            "paradigm": self.params.paradigm,
            "max_depth": self.params.max_depth,
            "threshold": self.params.threshold,
            "similarity": self.params.similarity_label,
            "classifier": self.params.module_spec.classifier_kind,
            "footprint_ranges": waypoint_ranges(self.footprint),
            "modules": [m.state_dict() for m in self.modules],
        }


def waypoint_ranges(waypoints: frozenset[int]) -> list[list[int]]:
    """Sorted [start, end) index ranges covering a waypoint set."""
    ranges: list[list[int]] = []
    for w in sorted(waypoints):
        if ranges and ranges[-1][1] == w:
            ranges[-1][1] = w + 1
        else:
            ranges.append([w, w + 1])
    return ranges


def _plugin_seed(seed: int, section: Section, dev_fold: int) -> int:
    ss = np.random.SeedSequence(
        [seed, dev_fold, section.start_m, section.end_m, section.depth]
    )
    return int(ss.generate_state(1)[0])


def _train_one_module(
    data: RouteData,
    section: Section,
    spec: ModuleSpec,
    train_ids: list[str],
    other_ids: list[str],
    seed: int,
    dev_fold: int,
) -> TrainedModule:
    labels = [data.labels[i] for i in train_ids]
    fallback = majority_label(labels)
    try:
        if spec.classifier_kind == KIND_KNN:
            return knn_train(train_ids, labels, spec, section)
        if spec.classifier_kind == KIND_LOGREG:
            if len(set(labels)) < 2:
                raise ClassifierError("degenerate labels")
            matrix = data.matrix(section, spec.similarity)
            features = matrix.submatrix(train_ids, train_ids)
            return logreg_train(features, train_ids, labels, spec, section)
        # Plugin: train on windows of the training clips, predict every other
        # session's clip once so later votes replay stored predictions.
        clips = data.clips_10hz(section)
        train_windows: list[tuple[str, np.ndarray]] = []
        window_labels: list[str] = []
        for sid in train_ids:
            values = clips[sid]
            n = values.shape[0]
            for start in range(0, n - PLUGIN_WINDOW_FRAMES + 1, PLUGIN_WINDOW_STRIDE):
                train_windows.append(
                    (f"{sid}:{start}", values[start : start + PLUGIN_WINDOW_FRAMES])
                )
                window_labels.append(data.labels[sid])
        if not train_windows:
            raise ClassifierError("no training windows in section")
        predict_clips = []
        for sid in other_ids:
            values = clips[sid]
            n = values.shape[0]
            windows = [
                values[start : start + PLUGIN_WINDOW_FRAMES]
                for start in range(0, n - PLUGIN_WINDOW_FRAMES + 1, PLUGIN_WINDOW_STRIDE)
            ]
            predict_clips.append((sid, windows))
        return plugin_adapter(
            spec,
            section,
            train_windows,
            window_labels,
            train_ids,
            predict_clips,
            _plugin_seed(seed, section, dev_fold),
        )
    except (ClassifierError, PluginError):
        return FailedModule(
            spec=spec, section=section, training_ids=tuple(train_ids), fallback=fallback
        )


def predict_session(module: TrainedModule, data: RouteData, session_id: str) -> str:
    """One module's vote for one session, from its own section's clipping."""
    if isinstance(module, PluginModule):
        return module.predict_clip(session_id)
    if isinstance(module, FailedModule):
        return module.predict(np.zeros(0))
    matrix = data.matrix(module.section, module.spec.similarity)
    features = matrix.submatrix([session_id], list(module.training_ids))[0]
    return module.predict(features)


def isr(
    data: RouteData,
    fold_plan: FoldPlan,
    eval_fold: int,
    section: Section,
    depth: int,
    params: IsrParams,
    seed: int,
) -> list[TrainedModule]:
    """Recursive section reduction over one section subtree.

    Leave-one-development-fold-out over the non-evaluation folds yields one
    candidate module per development fold; the paradigm filters candidates,
    the mean kept development accuracy gates recursion and becomes the
    children's threshold."""
    dev_folds = [f for f in range(fold_plan.k) if f != eval_fold]
    folds = fold_plan.as_dict()
    kept: list[TrainedModule] = []
    for dev_fold in dev_folds:
        train_ids = [
            sid
            for sid in data.session_ids
            if folds[data.by_id[sid].participant_id] not in (eval_fold, dev_fold)
        ]
        dev_ids = [
            sid
            for sid in data.session_ids
            if folds[data.by_id[sid].participant_id] == dev_fold
        ]
        other_ids = [sid for sid in data.session_ids if sid not in train_ids]
        module = _train_one_module(
            data, section, params.module_spec, train_ids, other_ids, seed, dev_fold
        )
        if isinstance(module, FailedModule):
            module.dev_accuracy = 0.0
        else:
            preds = [predict_session(module, data, sid) for sid in dev_ids]
            truth = [data.labels[sid] for sid in dev_ids]
            module.dev_accuracy = float(metrics.accuracy(truth, preds))
        if params.paradigm == PARADIGM_ALL or module.dev_accuracy > params.threshold:
            kept.append(module)
    if not kept:
        return []
    mean_acc = sum(m.dev_accuracy for m in kept) / len(kept)
    if mean_acc < params.threshold:
        return []
    if depth + 1 < params.max_depth and section.length_m >= 10:
        child_params = IsrParams(
            params.module_spec, params.max_depth, mean_acc, params.paradigm
        )
        sub_modules: list[TrainedModule] = []
        for child in subdivide(section):
            sub_modules.extend(
                isr(data, fold_plan, eval_fold, child, depth + 1, child_params, seed)
            )
        if sub_modules:
            return sub_modules
    return kept


def build_ensemble(
    data: RouteData,
    fold_plan: FoldPlan,
    eval_fold: int,
    params: IsrParams,
    seed: int,
) -> Ensemble:
    """Harvest modules from every top-level section tree for one held-out
    evaluation fold."""
    modules: list[TrainedModule] = []
    for section in top_level_sections(data.lattice):
        modules.extend(isr(data, fold_plan, eval_fold, section, 0, params, seed))
    footprint: frozenset[int] = frozenset()
    for m in modules:
        footprint |= waypoints_of(m.section, data.lattice)
    folds = fold_plan.as_dict()
    training_labels = [
        data.labels[sid]
        for sid in data.session_ids
        if folds[data.by_id[sid].participant_id] != eval_fold
    ]
    return Ensemble(
        eval_fold=eval_fold,
        modules=modules,
        footprint=footprint,
        params=params,
        fallback_label=majority_label(training_labels),
    )


def classify_session(ensemble: Ensemble, data: RouteData, session_id: str) -> str:
    """Equal-weight plurality vote of the member modules; an empty ensemble
    falls back to the majority training class."""
    if not ensemble.modules:
        return ensemble.fallback_label
    votes = [predict_session(m, data, session_id) for m in ensemble.modules]
    return majority_label(votes)


@dataclass
class EvaluationReport:
    """Five-fold evaluation of one grid point on one route."""

    route_id: str
    params: IsrParams
    seed: int
    fold_accuracies: tuple[Fraction, ...]
    footprints: metrics.FootprintSet
    n_modules: int
    config_index: int = -1

    @property
    def accuracy(self) -> Fraction:
        return sum(self.fold_accuracies, Fraction(0)) / len(self.fold_accuracies)

    @property
    def puor(self) -> Fraction:
        return metrics.puor(self.footprints)

    @property
    def pior(self) -> Fraction:
        return metrics.pior(self.footprints)

    @property
    def jiwu(self) -> Fraction:
        return metrics.jiwu(self.footprints)

    @property
    def jiwe(self) -> Fraction:
        return metrics.jiwe(self.footprints)

    def csv_row(self) -> list[str]:
        return [
            self.route_id,
            self.params.similarity_label,
            self.params.module_spec.label,
            self.params.paradigm,
            str(self.params.max_depth),
            f"{self.params.threshold:.2f}",
            metrics.render(self.accuracy),
            metrics.render(self.puor),
            metrics.render(self.pior),
            metrics.render(self.jiwu),
            metrics.render(self.jiwe),
            str(self.seed),
            str(self.config_index),
            str(self.n_modules),
        ]


REPORT_COLUMNS = (
    "route",
    "similarity",
    "module",
    "paradigm",
    "max_depth",
    "threshold",
    "acc",
    "puor",
    "pior",
    "jiwu",
    "jiwe",
    "seed",
    "config_index",
    "n_modules",
)


def evaluate_route(
    data: RouteData,
    params: IsrParams,
    seed: int,
    k: int = 5,
    fold_plan: FoldPlan | None = None,
    jobs: int = 1,
) -> tuple[EvaluationReport, list[Ensemble]]:
    """Build one ensemble per held-out fold and score the held-out sessions.

    ``jobs`` caps worker threads for the per-fold builds; results are ordered
    by fold index, so the report is independent of the worker count."""
    if fold_plan is None:
        fold_plan = make_fold_plan(data.sessions, k, seed)
    folds = fold_plan.as_dict()

    def run_fold(eval_fold: int) -> tuple[Fraction, Ensemble]:
        ensemble = build_ensemble(data, fold_plan, eval_fold, params, seed)
        eval_ids = [
            sid
            for sid in data.session_ids
            if folds[data.by_id[sid].participant_id] == eval_fold
        ]
        if not eval_ids:
            raise EngineError(f"evaluation fold {eval_fold} is empty")
        preds = [classify_session(ensemble, data, sid) for sid in eval_ids]
        truth = [data.labels[sid] for sid in eval_ids]
        return metrics.accuracy(truth, preds), ensemble

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_fold, range(fold_plan.k)))
    else:
        results = [run_fold(f) for f in range(fold_plan.k)]
    accuracies = [acc for acc, _ in results]
    ensembles = [ens for _, ens in results]
    footprints = metrics.FootprintSet(
        tuple(e.footprint for e in ensembles),
        frozenset(range(data.lattice.waypoint_count)),
        data.lattice.event_waypoints(),
    )
    report = EvaluationReport(
        route_id=data.lattice.route_id,
        params=params,
        seed=seed,
        fold_accuracies=tuple(accuracies),
        footprints=footprints,
        n_modules=sum(len(e.modules) for e in ensembles),
    )
    return report, ensembles


# --- grids ------------------------------------------------------------------


def similarity_grid(k: int = 1) -> list[IsrParams]:
    """15 similarity functions x 2 classifiers x 4 depths x 11 thresholds x
    2 paradigms = 2,640 configurations."""
    grid = []
    for sim in all_specs():
        for kind in (KIND_KNN, KIND_LOGREG):
            spec = ModuleSpec(kind, similarity=sim, k=k)
            for depth in MAX_DEPTH_GRID:
                for thresh in THRESHOLD_GRID:
                    for paradigm in PARADIGM_GRID:
                        grid.append(IsrParams(spec, depth, thresh, paradigm))
    return grid


def plugin_grid() -> list[IsrParams]:
    """4 depths x 11 thresholds x 2 paradigms = 88 plugin configurations."""
    spec = ModuleSpec(KIND_PLUGIN)
    return [
        IsrParams(spec, depth, thresh, paradigm)
        for depth in MAX_DEPTH_GRID
        for thresh in THRESHOLD_GRID
        for paradigm in PARADIGM_GRID
    ]


def small_grid(include_plugin: bool = False) -> list[IsrParams]:
    """A quick 2x2x2x2x2 similarity slice, optionally with two plugin points."""
    sims = (SimilaritySpec("DTW"), SimilaritySpec("FAST_DTW", 1))
    grid = []
    for sim in sims:
        for kind in (KIND_KNN, KIND_LOGREG):
            spec = ModuleSpec(kind, similarity=sim)
            for depth in (1, 2):
                for thresh in (0.0, 0.3):
                    for paradigm in PARADIGM_GRID:
                        grid.append(IsrParams(spec, depth, thresh, paradigm))
    if include_plugin:
        spec = ModuleSpec(KIND_PLUGIN)
        grid.append(IsrParams(spec, 1, 0.0, PARADIGM_ALL))
        grid.append(IsrParams(spec, 2, 0.3, PARADIGM_ANY))
    return grid


def grid_search(
    data: RouteData,
    grid: Sequence[IsrParams],
    seed: int,
    jobs: int = 1,
) -> list[tuple[IsrParams, EvaluationReport]]:
    """Evaluate every grid point with a shared fold plan and matrix cache;
    results sorted by accuracy descending, ties by fewer modules."""
    fold_plan = make_fold_plan(data.sessions, 5, seed)

    def run(indexed: tuple[int, IsrParams]) -> tuple[int, IsrParams, EvaluationReport]:
        index, params = indexed
        report, _ = evaluate_route(data, params, seed, fold_plan=fold_plan)
        report.config_index = index
        return index, params, report

    items = list(enumerate(grid))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(item) for item in items]
    results.sort(key=lambda t: t[0])
    ranked = [(params, report) for _, params, report in results]
    ranked.sort(key=lambda pr: (-pr[1].accuracy, pr[1].n_modules))
    return ranked


def write_reports_csv(path: str | Path, reports: Iterable[EvaluationReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            writer.writerow(report.csv_row())


def write_footprints_json(
    path: str | Path, entries: dict[str, metrics.FootprintSet]
) -> None:
    """Footprints per configuration key, as waypoint-index range lists."""
    doc = {
        key: {
            "folds": [waypoint_ranges(s) for s in fp.fold_footprints],
            "events": waypoint_ranges(fp.event_waypoints),
            "lattice_size": len(fp.lattice_waypoints),
        }
        for key, fp in sorted(entries.items())
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
