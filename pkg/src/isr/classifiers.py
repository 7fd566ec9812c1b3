"""Section-scoped classifier modules: k-NN and multinomial logistic regression
over similarity features, plus the external-plugin adapter."""

from __future__ import annotations

import base64
import json
import os
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from isr.lattice import Section
from isr.similarity import SimilaritySpec

# Fixed ordinal order; ties everywhere break toward the lower ordinal.
CLASS_LABELS = ("CONTROL", "REGULATED", "DELAYED")

KIND_KNN = "KNN"
KIND_LOGREG = "LOGREG"
KIND_PLUGIN = "PLUGIN"

PLUGIN_CMD_ENV = "ISR_PLUGIN_CMD"


class ClassifierError(ValueError):
    """Raised for degenerate training inputs or prediction misuse."""


class PluginError(RuntimeError):
    """Raised when the external plugin process fails or violates the protocol."""


def label_ordinal(label: str) -> int:
    return CLASS_LABELS.index(label)


def majority_label(labels: Sequence[str]) -> str:
    """Plurality with ties broken by class ordinal."""
    if not labels:
        raise ClassifierError("no labels to vote over")
    counts = {c: 0 for c in CLASS_LABELS}
    for lab in labels:
        counts[lab] += 1
    best = max(counts.values())
    return next(c for c in CLASS_LABELS if counts[c] == best)


@dataclass(frozen=True)
class ModuleSpec:
    """Classifier kind plus training hyperparameters for one module family."""

    classifier_kind: str
    similarity: SimilaritySpec | None = None
    k: int = 1
    l2_lambda: float = 1e-3
    learning_rate: float = 1e-2
    iterations: int = 500

    def __post_init__(self):
        if self.classifier_kind not in (KIND_KNN, KIND_LOGREG, KIND_PLUGIN):
            raise ClassifierError(f"unknown classifier kind {self.classifier_kind!r}")
        if self.classifier_kind != KIND_PLUGIN and self.similarity is None:
            raise ClassifierError("similarity-based modules need a SimilaritySpec")
        if self.k < 1 or self.l2_lambda <= 0 or self.learning_rate <= 0 or self.iterations < 1:
            raise ClassifierError("hyperparameters must be positive")

    @property
    def label(self) -> str:
        if self.classifier_kind == KIND_KNN:
            return f"{self.k}-NN"
        return "LogReg" if self.classifier_kind == KIND_LOGREG else "Plugin"


@dataclass
class TrainedModule:
    """A classifier bound to one section, with its development accuracy."""

    spec: ModuleSpec
    section: Section
    training_ids: tuple[str, ...]
    dev_accuracy: float = 0.0

    def predict(self, query_features: np.ndarray) -> str:
        raise NotImplementedError

    def state_dict(self) -> dict:
        return {
            "kind": self.spec.classifier_kind,
            "similarity": None if self.spec.similarity is None else self.spec.similarity.label,
            "section": [self.section.start_m, self.section.end_m, self.section.depth],
            "training_ids": list(self.training_ids),
            "dev_accuracy": self.dev_accuracy,
        }


@dataclass
class KnnModule(TrainedModule):
    training_labels: tuple[str, ...] = ()

    def predict(self, query_features: np.ndarray) -> str:
        dists = np.asarray(query_features, dtype=np.float64)
        if dists.shape != (len(self.training_ids),):
            raise ClassifierError("feature dimension mismatch")
        order = sorted(
            range(len(dists)),
            key=lambda i: (dists[i], label_ordinal(self.training_labels[i]), i),
        )
        return majority_label([self.training_labels[i] for i in order[: self.spec.k]])

    def state_dict(self) -> dict:
        doc = super().state_dict()
        doc["training_labels"] = list(self.training_labels)
        doc["k"] = self.spec.k
        return doc


@dataclass
class LogregModule(TrainedModule):
    weights: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    col_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    col_std: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def predict(self, query_features: np.ndarray) -> str:
        x = np.asarray(query_features, dtype=np.float64)
        if x.shape != self.col_mean.shape:
            raise ClassifierError("feature dimension mismatch")
        z = np.where(self.col_std > 0, (x - self.col_mean) / np.where(self.col_std > 0, self.col_std, 1.0), 0.0)
        logits = self.weights[:, :-1] @ z + self.weights[:, -1]
        best = logits.max()
        return next(c for i, c in enumerate(CLASS_LABELS) if logits[i] == best)

    def probabilities(self, query_features: np.ndarray) -> np.ndarray:
        x = np.asarray(query_features, dtype=np.float64)
        z = np.where(self.col_std > 0, (x - self.col_mean) / np.where(self.col_std > 0, self.col_std, 1.0), 0.0)
        logits = self.weights[:, :-1] @ z + self.weights[:, -1]
        e = np.exp(logits - logits.max())
        return e / e.sum()

    def state_dict(self) -> dict:
        doc = super().state_dict()
        doc["weights"] = [[float(v) for v in row] for row in self.weights]
        doc["col_mean"] = [float(v) for v in self.col_mean]
        doc["col_std"] = [float(v) for v in self.col_std]
        return doc


@dataclass
class FailedModule(TrainedModule):
    """Stands in for a module whose training was degenerate; always votes its
    training majority and carries development accuracy 0."""

    fallback: str = CLASS_LABELS[0]

    def predict(self, query_features: np.ndarray) -> str:
        return self.fallback


def knn_train(
    training_ids: Sequence[str],
    labels: Sequence[str],
    spec: ModuleSpec,
    section: Section,
) -> KnnModule:
    """Store training ids and labels; queries are ranked by similarity cost."""
    if len(training_ids) == 0:
        raise ClassifierError("empty training set")
    if len(training_ids) != len(labels):
        raise ClassifierError("ids and labels length mismatch")
    return KnnModule(
        spec=spec,
        section=section,
        training_ids=tuple(training_ids),
        training_labels=tuple(labels),
    )


def softmax_loss_grad(
    weights: np.ndarray, features: np.ndarray, onehot: np.ndarray, l2_lambda: float
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy + L2 (bias unpenalized) and its analytic gradient.

    ``features`` already carries the bias column; ``weights`` is (3, d+1)."""
    n = features.shape[0]
    logits = features @ weights.T
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = -np.log(np.clip((probs * onehot).sum(axis=1), 1e-300, None)).mean()
    reg = weights.copy()
    reg[:, -1] = 0.0
    loss += l2_lambda * np.sum(reg**2)
    grad = (probs - onehot).T @ features / n + 2.0 * l2_lambda * reg
    return float(loss), grad


def logreg_train(
    features: np.ndarray,
    training_ids: Sequence[str],
    labels: Sequence[str],
    spec: ModuleSpec,
    section: Section,
) -> LogregModule:
    """Multinomial softmax regression by full-batch gradient descent with fixed
    iterations, zero init, and per-column feature standardization."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != len(labels):
        raise ClassifierError("features must be (n_samples, n_features)")
    if len(set(labels)) < 2:
        raise ClassifierError("degenerate labels")
    col_mean = features.mean(axis=0)
    col_std = features.std(axis=0)
    z = np.where(col_std > 0, (features - col_mean) / np.where(col_std > 0, col_std, 1.0), 0.0)
    x = np.hstack([z, np.ones((z.shape[0], 1))])
    onehot = np.zeros((len(labels), len(CLASS_LABELS)))
    for i, lab in enumerate(labels):
        onehot[i, label_ordinal(lab)] = 1.0
    weights = np.zeros((len(CLASS_LABELS), x.shape[1]))
    for _ in range(spec.iterations):
        _, grad = softmax_loss_grad(weights, x, onehot, spec.l2_lambda)
        weights -= spec.learning_rate * grad
    return LogregModule(
        spec=spec,
        section=section,
        training_ids=tuple(training_ids),
        weights=weights,
        col_mean=col_mean,
        col_std=col_std,
    )


def predict(module: TrainedModule, query_features: np.ndarray) -> str:
    return module.predict(query_features)


# --- external plugin adapter ------------------------------------------------


@dataclass
class PluginModule(TrainedModule):
    """Replays per-clip predictions received from the plugin process."""

    predictions: Mapping[str, str] = field(default_factory=dict)

    def predict_clip(self, clip_id: str) -> str:
        try:
            return self.predictions[clip_id]
        except KeyError:
            raise ClassifierError(f"no stored plugin prediction for clip {clip_id!r}")

    def predict(self, query_features: np.ndarray) -> str:
        raise ClassifierError("plugin modules predict by clip id, not feature vector")

    def state_dict(self) -> dict:
        doc = super().state_dict()
        doc["predictions"] = dict(sorted(self.predictions.items()))
        return doc


def encode_window(values: np.ndarray) -> dict:
    """Little-endian float32 frames, base64-encoded, for the wire protocol."""
    arr = np.asarray(values, dtype="<f4")
    return {
        "frames": int(arr.shape[0]),
        "channels": int(arr.shape[1]),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_window(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return arr.reshape(doc["frames"], doc["channels"])


def plugin_command() -> str | None:
    return os.environ.get(PLUGIN_CMD_ENV)


def run_plugin(
    train_windows: Sequence[tuple[str, np.ndarray]],
    train_labels: Sequence[str],
    predict_clips: Sequence[tuple[str, Sequence[np.ndarray]]],
    seed: int,
    command: str | None = None,
    timeout_s: float = 900.0,
) -> dict[str, str]:
    """Launch the plugin, stream training windows then prediction clips, and
    return the per-clip label map."""
    cmd = command or plugin_command()
    if not cmd:
        raise PluginError(f"no plugin command configured ({PLUGIN_CMD_ENV} unset)")
    train_msg = {
        "type": "train",
        "payload": {
            "seed": int(seed),
            "windows": [dict(id=wid, **encode_window(w)) for wid, w in train_windows],
            "labels": list(train_labels),
        },
    }
    predict_msg = {
        "type": "predict",
        "payload": {
            "clips": [
                {"id": cid, "windows": [encode_window(w) for w in windows]}
                for cid, windows in predict_clips
            ]
        },
    }
    request = json.dumps(train_msg) + "\n" + json.dumps(predict_msg) + "\n"
    try:
        proc = subprocess.run(
            shlex.split(cmd),
            input=request,
            capture_output=True,
            text=True,
            timeout=timeout_s,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise PluginError(f"plugin process failure: {exc}") from exc
    if proc.returncode != 0:
        raise PluginError(f"plugin exited {proc.returncode}: {proc.stderr.strip()[:500]}")
    replies = [line for line in proc.stdout.splitlines() if line.strip()]
    if len(replies) != 2:
        raise PluginError(f"expected 2 reply frames, got {len(replies)}")
    parsed = []
    for line in replies:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PluginError(f"malformed plugin reply: {exc}") from exc
        if msg.get("type") == "error":
            raise PluginError(f"plugin error: {msg.get('payload', {}).get('message')}")
        if msg.get("type") != "result":
            raise PluginError(f"unexpected reply type {msg.get('type')!r}")
        parsed.append(msg)
    preds = parsed[1].get("payload", {}).get("predictions")
    if not isinstance(preds, list):
        raise PluginError("predict reply missing predictions")
    out: dict[str, str] = {}
    for entry in preds:
        label = entry.get("label")
        if label not in CLASS_LABELS:
            raise PluginError(f"plugin returned unknown label {label!r}")
        out[entry["id"]] = label
    missing = {cid for cid, _ in predict_clips} - out.keys()
    if missing:
        raise PluginError(f"plugin returned no prediction for clips {sorted(missing)[:5]}")
    return out


def plugin_adapter(
    spec: ModuleSpec,
    section: Section,
    train_windows: Sequence[tuple[str, np.ndarray]],
    train_labels: Sequence[str],
    training_ids: Sequence[str],
    predict_clips: Sequence[tuple[str, Sequence[np.ndarray]]],
    seed: int,
    command: str | None = None,
) -> PluginModule:
    """Train the external classifier and wrap its per-clip predictions."""
    predictions = run_plugin(
        train_windows, train_labels, predict_clips, seed, command=command
    )
    return PluginModule(
        spec=spec,
        section=section,
        training_ids=tuple(training_ids),
        predictions=predictions,
    )
