"""Per-epoch confidence-network inputs and true-class-probability targets.

Each channel pair of a recording yields a (T, 14) feature matrix:

* columns 0-3   additive log-ratio transform of that pair's softmax,
                with the last stage (REM) as the reference component
* columns 4-8   one-of-five code of the majority-vote predicted stage
* columns 9-13  that pair's hidden features

The regression target per epoch is the majority softmax value at the true
stage; epochs with an Unknown reference stage get a target of 0, since no
softmax component can match the correct class there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_data import UNKNOWN, N_STAGES, Recording, majority_softmax, predicted_hypnogram

FEATURE_DIM = 14
ALR_CLAMP = 1e-8


@dataclass
class FeatureSequence:
    recording_id: str
    pair_index: int
    features: np.ndarray  # (T, 14) float64
    targets: np.ndarray | None = None  # (T,) float64 in [0, 1]


def alr_transform(softmax: np.ndarray) -> np.ndarray:
    """Additive log-ratio transform of softmax rows, reference = last class.

    Components are clamped to >= 1e-8 and renormalized first, so exact zeros
    (possible in degenerate or generated outputs) cannot produce infinities.
    Accepts a single row (5,) or a matrix (T, 5); returns (4,) or (T, 4).
    """
    p = np.asarray(softmax, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    p = np.maximum(p, ALR_CLAMP)
    p = p / p.sum(axis=1, keepdims=True)
    out = np.log(p[:, : N_STAGES - 1] / p[:, N_STAGES - 1 :])
    return out[0] if single else out


def tcp_target(softmax_majority: np.ndarray, true_label: int) -> float:
    """Majority softmax value at the true stage; 0 for Unknown."""
    if true_label == UNKNOWN:
        return 0.0
    return float(softmax_majority[true_label])


def tcp_targets(majority: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Vectorized tcp_target over a whole recording: (T, 5) x (T,) -> (T,)."""
    idx = np.where(labels == UNKNOWN, 0, labels).astype(np.intp)
    tcp = majority[np.arange(majority.shape[0]), idx]
    return np.where(labels == UNKNOWN, 0.0, tcp)


def assemble_features(recording: Recording) -> list:
    """Build one FeatureSequence per channel pair.

    The one-of-five class code encodes the majority-vote prediction, so it is
    identical across the pairs of one recording; the ALR block and the hidden
    block are pair-specific.
    """
    if recording.hidden is None:
        raise ValueError(
            f"{recording.recording_id}: hidden features are required to "
            "assemble confidence-network inputs"
        )
    majority = majority_softmax(recording)
    predicted = predicted_hypnogram(recording)
    T = recording.n_epochs
    code = np.zeros((T, N_STAGES))
    code[np.arange(T), predicted] = 1.0
    targets = None
    if recording.labels is not None:
        targets = tcp_targets(majority, recording.labels)
    out = []
    for m in range(recording.n_pairs):
        features = np.empty((T, FEATURE_DIM))
        features[:, 0:4] = alr_transform(recording.softmax[m])
        features[:, 4:9] = code
        features[:, 9:14] = recording.hidden[m].astype(np.float64)
        out.append(
            FeatureSequence(
                recording_id=recording.recording_id,
                pair_index=m,
                features=features,
                targets=None if targets is None else targets.copy(),
            )
        )
    return out
