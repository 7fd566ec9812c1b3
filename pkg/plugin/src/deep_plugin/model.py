"""The Conv-LSTM window classifier and its fixed training recipe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

CLASS_LABELS = ("CONTROL", "REGULATED", "DELAYED")


@dataclass(frozen=True)
class DeepLstmSpec:
    """Fixed architecture and training hyperparameters.

    Values are deliberately not configurable from the wire: the plugin's only
    request-level degree of freedom is the seed."""

    n_channels: int = 7
    window_frames: int = 30
    conv_filters: int = 64
    conv_kernel: int = 5
    conv_stride: int = 1
    pool_size: int = 2
    lstm_hidden: int = 64
    dense_units: int = 64
    dropout: float = 0.2
    n_classes: int = 3
    learning_rate: float = 1e-4
    epochs: int = 50
    batch_size: int = 32


class DeepLstm(nn.Module):
    """Two 1-D conv layers, average pooling, an LSTM, and a dense softmax head."""

    def __init__(self, spec: DeepLstmSpec | None = None):
        super().__init__()
        self.spec = spec or DeepLstmSpec()
        s = self.spec
        self.conv1 = nn.Conv1d(s.n_channels, s.conv_filters, s.conv_kernel, s.conv_stride)
        self.conv2 = nn.Conv1d(s.conv_filters, s.conv_filters, s.conv_kernel, s.conv_stride)
        self.pool = nn.AvgPool1d(s.pool_size)
        self.drop1 = nn.Dropout(s.dropout)
        self.lstm = nn.LSTM(s.conv_filters, s.lstm_hidden, batch_first=True)
        self.dense = nn.Linear(s.lstm_hidden, s.dense_units)
        self.drop2 = nn.Dropout(s.dropout)
        self.head = nn.Linear(s.dense_units, s.n_classes)
        # Zero-initialized head: logits start tied, so even the small fixed
        # learning rate establishes the correct class ordering quickly.
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(batch, frames, channels) -> (batch, n_classes) logits."""
        x = x.transpose(1, 2)
        x = torch.relu(self.conv1(x))
        x = torch.relu(self.conv2(x))
        x = self.pool(x)
        x = self.drop1(x)
        x = x.transpose(1, 2)
        _, (hidden, _) = self.lstm(x)
        x = torch.relu(self.dense(hidden[-1]))
        x = self.drop2(x)
        return self.head(x)

    def probabilities(self, x: torch.Tensor) -> torch.Tensor:
        """Softmax rows; inference mode, dropout off."""
        self.eval()
        with torch.no_grad():
            return torch.softmax(self.forward(x), dim=1)


@dataclass
class TrainedState:
    model: DeepLstm
    channel_mean: np.ndarray
    channel_std: np.ndarray
    fallback: str


def _majority(labels) -> str:
    counts = {c: 0 for c in CLASS_LABELS}
    for lab in labels:
        counts[lab] += 1
    best = max(counts.values())
    return next(c for c in CLASS_LABELS if counts[c] == best)


def seed_everything(seed: int) -> None:
    """Single-threaded, fully seeded torch so runs are reproducible."""
    torch.set_num_threads(1)
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)


def standardize(windows: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    safe = np.where(std > 1e-9, std, 1.0)
    return (windows - mean) / safe


def train_model(
    windows: np.ndarray,
    labels: list[str],
    seed: int,
    spec: DeepLstmSpec | None = None,
) -> TrainedState:
    """Fit for exactly ``spec.epochs`` epochs (no early stopping).

    ``windows`` is (n, frames, channels); per-channel standardization is fit
    on the training windows and reused at prediction time."""
    spec = spec or DeepLstmSpec()
    if windows.ndim != 3 or windows.shape[0] != len(labels):
        raise ValueError("windows must be (n, frames, channels) matching labels")
    if any(lab not in CLASS_LABELS for lab in labels):
        raise ValueError("unknown training label")
    seed_everything(seed)
    mean = windows.mean(axis=(0, 1))
    std = windows.std(axis=(0, 1))
    x = torch.tensor(standardize(windows, mean, std), dtype=torch.float32)
    y = torch.tensor([CLASS_LABELS.index(lab) for lab in labels], dtype=torch.long)
    model = DeepLstm(spec)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    n = x.shape[0]
    generator = torch.Generator().manual_seed(seed)
    model.train()
    for _ in range(spec.epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, spec.batch_size):
            batch = order[start : start + spec.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(x[batch]), y[batch])
            loss.backward()
            optimizer.step()
    return TrainedState(model, mean, std, _majority(labels))


def predict_windows(state: TrainedState, windows: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """(softmax probabilities, per-window labels) for a (n, frames, channels) batch."""
    x = torch.tensor(
        standardize(windows, state.channel_mean, state.channel_std), dtype=torch.float32
    )
    probs = state.model.probabilities(x).numpy()
    picks = [CLASS_LABELS[int(i)] for i in probs.argmax(axis=1)]
    return probs, picks


def predict_clip(state: TrainedState, windows: np.ndarray | None) -> str:
    """Majority over the clip's window predictions, ties by class ordinal;
    a clip too short for any window falls back to the training majority."""
    if windows is None or windows.shape[0] == 0:
        return state.fallback
    _, picks = predict_windows(state, windows)
    return _majority(picks)
