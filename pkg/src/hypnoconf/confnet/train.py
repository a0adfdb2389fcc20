"""Training for the confidence network: Adam on mean-absolute-error.

One optimizer step per (recording, channel-pair) feature sequence; an epoch
is one seeded shuffle over all training sequences.  Validation MAE (dropout
off, epochs pooled) is tracked after every epoch, including an epoch-0
evaluation before any step, and training stops early once it has not
improved for `patience` epochs.  The returned model carries the
best-validation weights, rounded to float32-representable values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core_data import Dataset
from ..features import assemble_features
from .model import ConfidenceModel, forward, loss_and_gradients


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0

    def validate(self) -> None:
        if min(self.learning_rate, self.beta1, self.beta2, self.epsilon) < 0:
            raise ValueError("optimizer constants must be non-negative")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be >= 1")


class Adam:
    """Standard bias-corrected Adam over a list of parameter arrays."""

    def __init__(self, params: list, config: TrainConfig):
        self.config = config
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list, grads: list) -> None:
        c = self.config
        self.t += 1
        correction1 = 1.0 - c.beta1**self.t
        correction2 = 1.0 - c.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + c.epsilon)


def gather_sequences(dataset: Dataset, assignment: dict | None, tag: str) -> list:
    """All (recording, pair) feature sequences whose recording has `tag`."""
    out = []
    for rec in dataset:
        rec_tag = assignment[rec.recording_id] if assignment else rec.domain_tag
        if rec_tag == tag:
            out.extend(assemble_features(rec))
    return out


def pooled_mae(model: ConfidenceModel, sequences: list) -> float:
    """Total absolute error over all epochs of all sequences, dropout off."""
    total = 0.0
    count = 0
    for seq in sequences:
        pred = forward(model, seq)
        total += float(np.abs(pred - seq.targets).sum())
        count += pred.shape[0]
    if count == 0:
        raise ValueError("no epochs to evaluate")
    return total / count


def fit_normalization(model: ConfidenceModel, sequences: list) -> None:
    """Freeze input standardization statistics from the training split."""
    stacked = np.concatenate([seq.features for seq in sequences], axis=0)
    model.norm_mean = stacked.mean(axis=0)
    model.norm_var = stacked.var(axis=0)
    model.quantize_to_f32()


def train(model: ConfidenceModel, dataset: Dataset, assignment: dict | None, config: TrainConfig):
    """Returns (best model, history).

    `assignment` maps recording_id -> domain_tag; None uses the tags stored
    in the dataset.  History rows are dicts {epoch, train_mae, val_mae};
    epoch 0 holds the pre-training validation MAE with train_mae = None.
    """
    config.validate()
    train_seqs = gather_sequences(dataset, assignment, "ID_TRAIN")
    val_seqs = gather_sequences(dataset, assignment, "ID_VAL")
    if not train_seqs or not val_seqs:
        raise ValueError("both ID_TRAIN and ID_VAL must be non-empty")
    for seq in train_seqs + val_seqs:
        if seq.targets is None:
            raise ValueError(f"{seq.recording_id}: training requires labeled recordings")

    model = model.copy()
    fit_normalization(model, train_seqs)

    rng = np.random.default_rng(config.seed)
    params = model.param_arrays()
    optimizer = Adam(params, config)

    best_val = pooled_mae(model, val_seqs)
    best_model = model.copy()
    history = [{"epoch": 0, "train_mae": None, "val_mae": best_val}]
    since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_seqs))
        epoch_loss = 0.0
        for i in order:
            seq = train_seqs[i]
            try:
                loss, grads = loss_and_gradients(
                    model, seq, seq.targets, training=True, rng=rng
                )
            except FloatingPointError as exc:
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}") from exc
            optimizer.step(params, grads)
            epoch_loss += loss
        val_mae = pooled_mae(model, val_seqs)
        if not np.isfinite(val_mae):
            raise TrainingDivergedError(f"non-finite validation MAE at epoch {epoch}")
        history.append(
            {"epoch": epoch, "train_mae": epoch_loss / len(train_seqs), "val_mae": val_mae}
        )
        if val_mae < best_val:
            best_val = val_mae
            best_model = model.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    best_model.quantize_to_f32()
    return best_model, history


def history_to_csv_rows(history: list) -> list:
    rows = [["epoch", "train_mae", "val_mae"]]
    for entry in history:
        train_mae = "" if entry["train_mae"] is None else repr(float(entry["train_mae"]))
        rows.append([entry["epoch"], train_mae, repr(float(entry["val_mae"]))])
    return rows
