"""The auxiliary confidence network.

A five-layer sequence-to-sequence LSTM stack that regresses, per epoch, the
classifier's softmax value at the true stage (true class probability).  The
default stack is LSTM(50) -> bidirectional LSTM(30 per direction) ->
LSTM(10) -> LSTM(5) -> output LSTM(1) with activation (tanh + 1) / 2, fed
14-wide feature rows standardized by frozen running statistics; inverted
dropout at 25% sits between layers during training.  The default
configuration has exactly 35628 learned parameters.

Weights live in float64 for exact backprop checks but are always rounded to
float32-representable values when a model is created or returned from
training, so the float32 container round-trips to identical predictions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core_data import FormatError, Recording, _write_atomic
from ..features import FeatureSequence, assemble_features
from ..measures import UncertaintyScoreSeries
from .lstm import (
    LSTMWeights,
    bilstm_backward,
    bilstm_forward,
    init_lstm,
    lstm_backward,
    lstm_forward,
)

TCP_MEASURE = "tcp"
NORM_EPS = 1e-6
BIDIR_LAYER = 1  # index of the bidirectional layer within the stack

_MODEL_MAGIC = b"CNW1"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class ConfNetConfig:
    input_dim: int = 14
    layer_sizes: tuple = (50, 30, 10, 5, 1)
    dropout_rate: float = 0.25
    seed: int = 0

    def validate(self) -> None:
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if len(self.layer_sizes) != 5 or any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer_sizes must be five positive widths")
        if self.layer_sizes[-1] != 1:
            raise ValueError("the output layer has exactly one neuron")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def layer_input_dims(self) -> list:
        dims = [self.input_dim]
        for idx, size in enumerate(self.layer_sizes[:-1]):
            dims.append(2 * size if idx == BIDIR_LAYER else size)
        return dims


def expected_param_count(config: ConfNetConfig) -> int:
    """Closed form: sum over layers of 4h(i + h + 1), both directions of the
    bidirectional layer counted."""
    total = 0
    for idx, (i, h) in enumerate(zip(config.layer_input_dims(), config.layer_sizes)):
        n = 4 * h * (i + h + 1)
        total += 2 * n if idx == BIDIR_LAYER else n
    return total


@dataclass
class ConfidenceModel:
    config: ConfNetConfig
    norm_mean: np.ndarray  # (input_dim,), frozen, not learned
    norm_var: np.ndarray
    layers: list = field(default_factory=list)  # LSTMWeights or (fwd, bwd) pairs

    def param_arrays(self) -> list:
        """Learned arrays in fixed serialization order."""
        out = []
        for layer in self.layers:
            if isinstance(layer, tuple):
                for direction in layer:
                    out.extend([direction.W, direction.b])
            else:
                out.extend([layer.W, layer.b])
        return out

    def copy(self) -> "ConfidenceModel":
        layers = []
        for layer in self.layers:
            if isinstance(layer, tuple):
                layers.append(
                    tuple(LSTMWeights(W=d.W.copy(), b=d.b.copy()) for d in layer)
                )
            else:
                layers.append(LSTMWeights(W=layer.W.copy(), b=layer.b.copy()))
        return ConfidenceModel(
            config=self.config,
            norm_mean=self.norm_mean.copy(),
            norm_var=self.norm_var.copy(),
            layers=layers,
        )

    def quantize_to_f32(self) -> None:
        """Round every array to the nearest float32-representable value."""
        for arr in self.param_arrays():
            arr[...] = arr.astype(np.float32).astype(np.float64)
        self.norm_mean[...] = self.norm_mean.astype(np.float32).astype(np.float64)
        self.norm_var[...] = self.norm_var.astype(np.float32).astype(np.float64)


def count_params(model: ConfidenceModel) -> int:
    """Learned-parameter count; excludes the normalization statistics."""
    return sum(arr.size for arr in model.param_arrays())


def init_model(config: ConfNetConfig) -> ConfidenceModel:
    """Seeded Glorot-uniform initialization, forget-gate biases at 1."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    layers = []
    for idx, (d, h) in enumerate(zip(config.layer_input_dims(), config.layer_sizes)):
        if idx == BIDIR_LAYER:
            layers.append((init_lstm(d, h, rng), init_lstm(d, h, rng)))
        else:
            layers.append(init_lstm(d, h, rng))
    model = ConfidenceModel(
        config=config,
        norm_mean=np.zeros(config.input_dim),
        norm_var=np.ones(config.input_dim),
        layers=layers,
    )
    model.quantize_to_f32()
    return model


def _as_feature_matrix(features) -> np.ndarray:
    if isinstance(features, FeatureSequence):
        return features.features
    return np.asarray(features, dtype=np.float64)


def _forward_full(model, x, training, rng):
    """Forward pass keeping caches and dropout masks for backprop."""
    if x.shape[1] != model.config.input_dim:
        raise ValueError(
            f"feature width {x.shape[1]} != input_dim {model.config.input_dim}"
        )
    if training and model.config.dropout_rate > 0 and rng is None:
        raise ValueError("training-mode forward needs a seeded random generator")
    xs = (x - model.norm_mean) / np.sqrt(model.norm_var + NORM_EPS)
    caches = []
    masks = []
    rate = model.config.dropout_rate
    out = xs
    last = len(model.layers) - 1
    for idx, layer in enumerate(model.layers):
        if isinstance(layer, tuple):
            out, cache = bilstm_forward(layer[0], layer[1], out)
        else:
            out, cache = lstm_forward(layer, out, output_activation=(idx == last))
        caches.append(cache)
        if idx != last:
            if training and rate > 0:
                mask = (rng.uniform(size=out.shape) >= rate) / (1.0 - rate)
                out = out * mask
            else:
                mask = None
            masks.append(mask)
    return out[:, 0], caches, masks


def forward(model: ConfidenceModel, features, training: bool = False, rng=None) -> np.ndarray:
    """Predicted per-epoch confidence sequence, strictly inside (0, 1)."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    pred, _, _ = _forward_full(model, _as_feature_matrix(features), training, rng)
    return pred


def loss_and_gradients(model: ConfidenceModel, features, targets, training: bool = False, rng=None):
    """Mean-absolute-error loss and exact gradients for one sequence.

    The subgradient of |.| at 0 is taken as 0.  Returns (loss, grads) with
    grads ordered like ``model.param_arrays()``.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    x = _as_feature_matrix(features)
    targets = np.asarray(targets, dtype=np.float64)
    pred, caches, masks = _forward_full(model, x, training, rng)
    T = pred.shape[0]
    diff = pred - targets
    loss = float(np.abs(diff).mean())
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss")

    dpred = np.sign(diff) / T
    grads = []
    last = len(model.layers) - 1
    dh = dpred[:, None]
    for idx in range(last, -1, -1):
        if idx != last and masks[idx] is not None:
            dh = dh * masks[idx]
        layer = model.layers[idx]
        if isinstance(layer, tuple):
            dh, (dWf, dbf), (dWb, dbb) = bilstm_backward(layer[0], layer[1], caches[idx], dh)
            grads[:0] = [dWf, dbf, dWb, dbb]
        else:
            dh, dW, db = lstm_backward(layer, caches[idx], dh)
            grads[:0] = [dW, db]
    return loss, grads


def predict_tcp(model: ConfidenceModel, recording: Recording) -> UncertaintyScoreSeries:
    """Confidence per epoch, averaged over channel pairs like the majority
    vote; oriented score is 1 - confidence."""
    sequences = assemble_features(recording)
    preds = [forward(model, seq) for seq in sequences]
    tcp = np.mean(preds, axis=0)
    return UncertaintyScoreSeries(
        recording_id=recording.recording_id,
        measure=TCP_MEASURE,
        scores=1.0 - tcp,
        raw_values=tcp,
    )


def save_model(model: ConfidenceModel, path) -> None:
    """Versioned binary: magic, config block, normalization stats, then the
    learned float32 arrays in fixed layer order."""
    cfg = model.config
    parts = [struct.pack("<4sHH", _MODEL_MAGIC, _MODEL_VERSION, 0)]
    parts.append(struct.pack("<HH", cfg.input_dim, len(cfg.layer_sizes)))
    parts.append(struct.pack(f"<{len(cfg.layer_sizes)}H", *cfg.layer_sizes))
    parts.append(struct.pack("<f", cfg.dropout_rate))
    parts.append(model.norm_mean.astype("<f4").tobytes())
    parts.append(model.norm_var.astype("<f4").tobytes())
    for arr in model.param_arrays():
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    _write_atomic(Path(path), b"".join(parts))


def load_model(path) -> ConfidenceModel:
    data = Path(path).read_bytes()
    head = struct.Struct("<4sHH")
    if len(data) < head.size:
        raise FormatError(f"{path}: truncated model file")
    magic, version, _ = head.unpack_from(data, 0)
    if magic != _MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    off = head.size
    try:
        input_dim, n_layers = struct.unpack_from("<HH", data, off)
        off += 4
        sizes = struct.unpack_from(f"<{n_layers}H", data, off)
        off += 2 * n_layers
        (dropout_rate,) = struct.unpack_from("<f", data, off)
        off += 4
    except struct.error as exc:
        raise FormatError(f"{path}: truncated config block") from exc
    if n_layers != 5:
        raise FormatError(f"{path}: expected 5 layers, file claims {n_layers}")
    config = ConfNetConfig(
        input_dim=input_dim, layer_sizes=tuple(sizes), dropout_rate=float(dropout_rate)
    )
    try:
        config.validate()
    except ValueError as exc:
        raise FormatError(f"{path}: invalid config ({exc})") from exc

    expected = expected_param_count(config)
    remaining = len(data) - off - 2 * 4 * input_dim
    if remaining < 0 or remaining % 4:
        raise FormatError(f"{path}: truncated payload")
    actual = remaining // 4
    if actual != expected:
        raise FormatError(
            f"{path}: parameter count mismatch (config implies {expected}, "
            f"file holds {actual})"
        )

    def take(count):
        nonlocal off
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off).astype(np.float64)
        off += 4 * count
        return arr

    norm_mean = take(input_dim)
    norm_var = take(input_dim)
    layers = []
    dims = config.layer_input_dims()
    for idx, (d, h) in enumerate(zip(dims, config.layer_sizes)):
        n_dir = 2 if idx == BIDIR_LAYER else 1
        directions = []
        for _ in range(n_dir):
            W = take(4 * h * (d + h)).reshape(4 * h, d + h)
            b = take(4 * h)
            directions.append(LSTMWeights(W=W, b=b))
        layers.append(tuple(directions) if n_dir == 2 else directions[0])
    model = ConfidenceModel(
        config=config, norm_mean=norm_mean, norm_var=norm_var, layers=layers
    )
    if count_params(model) != expected:
        raise FormatError(f"{path}: parameter count mismatch after load")
    return model
