"""Conv-LSTM window classifier behind the newline-JSON plugin protocol."""

from deep_plugin.model import DeepLstmSpec, DeepLstm, train_model

__all__ = ["DeepLstmSpec", "DeepLstm", "train_model"]
