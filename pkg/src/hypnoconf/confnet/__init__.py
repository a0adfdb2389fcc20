"""Auxiliary confidence network: numpy LSTM stack, exact BPTT, Adam/MAE
training, channel-pair-averaged confidence prediction, serialization."""

from .lstm import LSTMWeights, bilstm_forward, init_lstm, lstm_backward, lstm_forward
from .model import (
    TCP_MEASURE,
    ConfidenceModel,
    ConfNetConfig,
    count_params,
    expected_param_count,
    forward,
    init_model,
    load_model,
    loss_and_gradients,
    predict_tcp,
    save_model,
)
from .train import (
    Adam,
    TrainConfig,
    TrainingDivergedError,
    gather_sequences,
    history_to_csv_rows,
    pooled_mae,
    train,
)

__all__ = [
    "Adam",
    "ConfNetConfig",
    "ConfidenceModel",
    "LSTMWeights",
    "TCP_MEASURE",
    "TrainConfig",
    "TrainingDivergedError",
    "bilstm_forward",
    "count_params",
    "expected_param_count",
    "forward",
    "gather_sequences",
    "history_to_csv_rows",
    "init_lstm",
    "init_model",
    "load_model",
    "loss_and_gradients",
    "lstm_backward",
    "lstm_forward",
    "pooled_mae",
    "predict_tcp",
    "save_model",
    "train",
]
