"""Softmax-based per-epoch uncertainty measures.

Seven measures over the per-pair softmax grid p[m, t, k] (M channel pairs,
T epochs, 5 stages), with the 0*log2(0) := 0 convention:

* ``entropy_avg``       mean over pairs of the softmax Shannon entropy (bits)
* ``ratio_avg``         mean over pairs of mean_k p_k / max(p)
* ``std_avg``           mean over pairs of (1/4) * sum_k |p_k - 0.2|
* ``max_majority``      max of the pair-averaged (majority) softmax
* ``std_majority``      (1/4) * sum_k |q_k - 0.2| on the majority softmax q
* ``pct_max_majority``  within-recording fractional rank of max_majority,
                        most-uncertain epoch ranked highest
* ``pct_std_majority``  same rank construction on std_majority

Each measure is reported both raw and as an oriented score where higher
always means more uncertain: entropy_avg and ratio_avg pass through,
max/std measures are negated, and the pct ranks are already oriented.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core_data import Recording

ENTROPY_AVG = "entropy_avg"
RATIO_AVG = "ratio_avg"
STD_AVG = "std_avg"
MAX_MAJORITY = "max_majority"
STD_MAJORITY = "std_majority"
PCT_MAX_MAJORITY = "pct_max_majority"
PCT_STD_MAJORITY = "pct_std_majority"

MEASURES = (
    ENTROPY_AVG,
    RATIO_AVG,
    STD_AVG,
    MAX_MAJORITY,
    STD_MAJORITY,
    PCT_MAX_MAJORITY,
    PCT_STD_MAJORITY,
)

# Moves from raw value to oriented score (higher = more uncertain).
_NEGATED = (STD_AVG, MAX_MAJORITY, STD_MAJORITY)


@dataclass
class UncertaintyScoreSeries:
    """Per-epoch scores from one measure (or predicted TCP) for one recording.

    ``scores`` are oriented so that higher means more uncertain; they are a
    strictly monotone transform of ``raw_values``.
    """

    recording_id: str
    measure: str
    scores: np.ndarray
    raw_values: np.ndarray


def fractional_rank(values: np.ndarray) -> np.ndarray:
    """Ascending fractional rank in (0, 1]; exact ties share the mean rank."""
    values = np.asarray(values)
    n = values.shape[0]
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)))[:-1] + 1
    mean_ranks = starts + (counts - 1) / 2.0
    return mean_ranks[inverse] / n


def _entropy_avg(p: np.ndarray) -> np.ndarray:
    terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=2).mean(axis=0)


def _ratio_avg(p: np.ndarray) -> np.ndarray:
    peaks = p.max(axis=2, keepdims=True)
    return (p / peaks).sum(axis=2).mean(axis=0) / 5.0


def _spread(p: np.ndarray) -> np.ndarray:
    # (1/4) * sum_k |p_k - 1/5|; the uniform distribution scores 0.
    return np.abs(p - 0.2).sum(axis=-1) / 4.0


def compute_measure(measure: str, recording: Recording) -> UncertaintyScoreSeries:
    """Evaluate one measure on every epoch of a recording."""
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    p = recording.softmax.astype(np.float64)
    q = p.mean(axis=0)  # majority softmax, (T, 5)

    if measure == ENTROPY_AVG:
        raw = _entropy_avg(p)
    elif measure == RATIO_AVG:
        raw = _ratio_avg(p)
    elif measure == STD_AVG:
        raw = _spread(p).mean(axis=0)
    elif measure == MAX_MAJORITY:
        raw = q.max(axis=1)
    elif measure == STD_MAJORITY:
        raw = _spread(q)
    elif measure == PCT_MAX_MAJORITY:
        raw = fractional_rank(-q.max(axis=1))
    else:  # PCT_STD_MAJORITY
        raw = fractional_rank(-_spread(q))

    scores = -raw if measure in _NEGATED else raw.copy()
    return UncertaintyScoreSeries(
        recording_id=recording.recording_id,
        measure=measure,
        scores=scores,
        raw_values=raw,
    )


def compute_all_measures(recording: Recording) -> list:
    return [compute_measure(m, recording) for m in MEASURES]


def write_scores_csv(series_list, fh) -> None:
    """Emit score series as CSV with columns
    recording_id, epoch_index, measure, raw_value, oriented_score."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["recording_id", "epoch_index", "measure", "raw_value", "oriented_score"])
    for series in series_list:
        for t in range(series.scores.shape[0]):
            writer.writerow(
                [
                    series.recording_id,
                    t,
                    series.measure,
                    repr(float(series.raw_values[t])),
                    repr(float(series.scores[t])),
                ]
            )


def read_scores_csv(fh) -> list:
    """Parse a scores CSV back into a list of UncertaintyScoreSeries."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != ["recording_id", "epoch_index", "measure", "raw_value", "oriented_score"]:
        raise ValueError(f"unexpected scores CSV header: {header}")
    grouped: dict = {}
    for row in reader:
        if not row:
            continue
        rid, idx, measure, raw, score = row
        grouped.setdefault((rid, measure), []).append((int(idx), float(raw), float(score)))
    out = []
    for (rid, measure), rows in grouped.items():
        rows.sort()
        indices = [r[0] for r in rows]
        if indices != list(range(len(rows))):
            raise ValueError(f"scores for {rid}/{measure} have gaps or duplicates")
        out.append(
            UncertaintyScoreSeries(
                recording_id=rid,
                measure=measure,
                raw_values=np.array([r[1] for r in rows]),
                scores=np.array([r[2] for r in rows]),
            )
        )
    return out
