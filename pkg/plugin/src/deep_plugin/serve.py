"""Newline-delimited JSON serving loop.

Frames: {"type": "train"|"predict"|"result"|"error", "payload": {...}} with
window data as base64 little-endian float32.  One request in flight at a
time; protocol violations emit an error frame and a nonzero exit."""

from __future__ import annotations

import base64
import json
import sys

import numpy as np

from deep_plugin.model import CLASS_LABELS, predict_clip, train_model


class ProtocolError(ValueError):
    pass


def decode_window(doc: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(doc["data"])
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        return arr.reshape(int(doc["frames"]), int(doc["channels"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ProtocolError(f"bad window payload: {exc}") from exc


def _stack(windows: list[dict]) -> np.ndarray:
    decoded = [decode_window(w) for w in windows]
    shapes = {w.shape for w in decoded}
    if len(shapes) > 1:
        raise ProtocolError(f"inconsistent window shapes {sorted(shapes)}")
    return np.stack(decoded) if decoded else np.zeros((0, 0, 0))


def handle_train(payload: dict) -> tuple[dict, object]:
    windows = payload.get("windows")
    labels = payload.get("labels")
    seed = payload.get("seed")
    if not isinstance(windows, list) or not isinstance(labels, list) or seed is None:
        raise ProtocolError("train payload needs windows, labels, seed")
    if len(windows) != len(labels):
        raise ProtocolError("window/label count mismatch")
    if not windows:
        raise ProtocolError("empty training set")
    if any(lab not in CLASS_LABELS for lab in labels):
        raise ProtocolError("unknown training label")
    state = train_model(_stack(windows), list(labels), int(seed))
    return {"type": "result", "payload": {"windows": len(windows)}}, state


def handle_predict(payload: dict, state) -> dict:
    if state is None:
        raise ProtocolError("predict before train")
    clips = payload.get("clips")
    if not isinstance(clips, list):
        raise ProtocolError("predict payload needs clips")
    predictions = []
    for clip in clips:
        if "id" not in clip:
            raise ProtocolError("clip without id")
        windows = clip.get("windows", [])
        stacked = _stack(windows) if windows else None
        predictions.append({"id": clip["id"], "label": predict_clip(state, stacked)})
    return {"type": "result", "payload": {"predictions": predictions}}


def serve(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    state = None
    for line in stdin:
        if not line.strip():
            continue
        try:
            try:
                msg = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"malformed frame: {exc}") from exc
            kind = msg.get("type")
            if kind == "train":
                reply, state = handle_train(msg.get("payload", {}))
            elif kind == "predict":
                reply = handle_predict(msg.get("payload", {}), state)
            else:
                raise ProtocolError(f"unknown frame type {kind!r}")
        except ProtocolError as exc:
            print(
                json.dumps({"type": "error", "payload": {"message": str(exc)}}),
                file=stdout,
                flush=True,
            )
            return 1
        print(json.dumps(reply), file=stdout, flush=True)
    return 0


def main() -> None:
    sys.exit(serve())


if __name__ == "__main__":
    main()
