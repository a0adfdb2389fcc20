"""Non-parametric bootstrap tests over per-subject confidence summaries.

Two hypotheses are assessed with percentile confidence intervals from
seeded resampling (5000 repetitions by default):

* mean-difference: the per-subject gap between mean confidence on epochs
  that agree with the reference scoring and those that diverge (rejected
  when the 95% CI excludes 0);
* correlation: association between per-subject mean confidence and a
  per-subject classification metric (Pearson by default, Spearman
  selectable).

Groups are diagnosis classes; a subject joins every class for which it has
at least one matching diagnosis, and groups with fewer than 10 eligible
subjects are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_data import DIAGNOSIS_CODES, UNKNOWN, Dataset, predicted_hypnogram
from .metrics import _rank_average, classification_report

MIN_GROUP_SIZE = 10
DEFAULT_REPS = 5000
GROUP_ALL = "ALL"


class InsufficientSubjectsError(ValueError):
    """A diagnosis group has fewer eligible subjects than required."""

    def __init__(self, message: str, eligible: int):
        super().__init__(message)
        self.eligible = eligible


class DegenerateInputError(ValueError):
    """A correlation input vector is constant."""


@dataclass
class SubjectSummary:
    subject_id: str
    mean_tcp_all: float
    mean_tcp_correct: float | None
    mean_tcp_incorrect: float | None
    mean_diff: float | None  # correct minus incorrect; None unless both exist
    acc: float
    f1w: float
    kappa: float
    n_epochs: int
    diagnoses: frozenset


@dataclass
class BootstrapResult:
    hypothesis: str  # "mean_diff" or "correlation"
    group: str
    metric: str | None
    n_subjects: int
    median: float
    ci_low: float
    ci_high: float
    reps: int
    seed: int
    rejected: bool
    redraws: int = 0


def summarize_subjects(dataset: Dataset, tcp_scores: dict) -> list:
    """Per-subject summaries, pooling all recordings of a subject.

    `tcp_scores` maps recording_id -> per-epoch confidence array (raw TCP).
    Unknown-labeled epochs are excluded from every aggregate.
    """
    out = []
    for subject_id, recordings in dataset.subjects().items():
        tcp_parts = []
        correct_parts = []
        true_parts = []
        pred_parts = []
        diagnoses = set()
        for rec in recordings:
            if rec.labels is None:
                raise ValueError(f"{rec.recording_id}: subject summaries need labels")
            tcp = np.asarray(tcp_scores[rec.recording_id], dtype=np.float64)
            if tcp.shape != (rec.n_epochs,):
                raise ValueError(f"{rec.recording_id}: confidence series length mismatch")
            pred = predicted_hypnogram(rec)
            keep = rec.labels != UNKNOWN
            tcp_parts.append(tcp[keep])
            correct_parts.append(pred[keep] == rec.labels[keep])
            true_parts.append(rec.labels[keep])
            pred_parts.append(pred[keep])
            diagnoses.update(rec.diagnoses)
        tcp = np.concatenate(tcp_parts)
        correct = np.concatenate(correct_parts)
        if tcp.size == 0:
            continue
        report = classification_report(np.concatenate(true_parts), np.concatenate(pred_parts))
        mean_correct = float(tcp[correct].mean()) if correct.any() else None
        mean_incorrect = float(tcp[~correct].mean()) if (~correct).any() else None
        diff = None
        if mean_correct is not None and mean_incorrect is not None:
            diff = mean_correct - mean_incorrect
        out.append(
            SubjectSummary(
                subject_id=subject_id,
                mean_tcp_all=float(tcp.mean()),
                mean_tcp_correct=mean_correct,
                mean_tcp_incorrect=mean_incorrect,
                mean_diff=diff,
                acc=report.acc,
                f1w=report.f1w,
                kappa=report.kappa,
                n_epochs=int(tcp.size),
                diagnoses=frozenset(diagnoses),
            )
        )
    return out


def group_members(summaries: list, group: str) -> list:
    """Subjects belonging to a diagnosis group (at least one matching code)."""
    if group == GROUP_ALL:
        return list(summaries)
    if group not in DIAGNOSIS_CODES:
        raise ValueError(f"unknown diagnosis group {group!r}")
    return [s for s in summaries if group in s.diagnoses]


def _rep_rngs(seed: int, reps: int) -> list:
    # One independent stream per resample, keyed (seed, r); results do not
    # depend on evaluation order.
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(reps)]


def _percentile_summary(stats: np.ndarray):
    median = float(np.median(stats))
    ci_low, ci_high = np.quantile(stats, [0.025, 0.975])
    return median, float(ci_low), float(ci_high)


def bootstrap_mean_diff(summaries: list, group: str, reps: int = DEFAULT_REPS, seed: int = 0) -> BootstrapResult:
    """Percentile CI for the mean per-subject confidence gap in a group.

    Eligible subjects are those with both concordant and discordant epochs;
    groups with fewer than 10 are refused.
    """
    eligible = [s for s in group_members(summaries, group) if s.mean_diff is not None]
    if len(eligible) < MIN_GROUP_SIZE:
        raise InsufficientSubjectsError(
            f"group {group}: {len(eligible)} eligible subjects, need >= {MIN_GROUP_SIZE}",
            eligible=len(eligible),
        )
    diffs = np.array([s.mean_diff for s in eligible])
    n = diffs.shape[0]
    stats = np.empty(reps)
    for r, rng in enumerate(_rep_rngs(seed, reps)):
        stats[r] = diffs[rng.integers(0, n, n)].mean()
    median, ci_low, ci_high = _percentile_summary(stats)
    return BootstrapResult(
        hypothesis="mean_diff",
        group=group,
        metric=None,
        n_subjects=n,
        median=median,
        ci_low=ci_low,
        ci_high=ci_high,
        reps=reps,
        seed=seed,
        rejected=not (ci_low <= 0.0 <= ci_high),
    )


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / np.sqrt((xc @ xc) * (yc @ yc)))


def _spearman(x: np.ndarray, y: np.ndarray) -> float:
    return _pearson(_rank_average(x), _rank_average(y))


def bootstrap_correlation(
    summaries: list,
    group: str,
    metric: str,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    method: str = "pearson",
) -> BootstrapResult:
    """Percentile CI for the confidence/performance correlation in a group.

    Zero-variance resamples are redrawn within their own stream; the number
    of redraws is reported.
    """
    if metric not in ("acc", "f1w", "kappa"):
        raise ValueError(f"metric must be acc, f1w, or kappa, not {metric!r}")
    if method not in ("pearson", "spearman"):
        raise ValueError(f"method must be pearson or spearman, not {method!r}")
    corr = _pearson if method == "pearson" else _spearman
    members = group_members(summaries, group)
    if len(members) < MIN_GROUP_SIZE:
        raise InsufficientSubjectsError(
            f"group {group}: {len(members)} eligible subjects, need >= {MIN_GROUP_SIZE}",
            eligible=len(members),
        )
    x = np.array([s.mean_tcp_all for s in members])
    y = np.array([getattr(s, metric) for s in members])
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInputError("confidence or metric vector is constant")
    n = x.shape[0]
    stats = np.empty(reps)
    redraws = 0
    for r, rng in enumerate(_rep_rngs(seed, reps)):
        for attempt in range(1000):
            idx = rng.integers(0, n, n)
            if np.ptp(x[idx]) > 0 and np.ptp(y[idx]) > 0:
                break
            redraws += 1
        else:
            raise DegenerateInputError("resampling keeps producing constant vectors")
        stats[r] = corr(x[idx], y[idx])
    median, ci_low, ci_high = _percentile_summary(stats)
    return BootstrapResult(
        hypothesis="correlation",
        group=group,
        metric=metric,
        n_subjects=n,
        median=median,
        ci_low=ci_low,
        ci_high=ci_high,
        reps=reps,
        seed=seed,
        rejected=not (ci_low <= 0.0 <= ci_high),
        redraws=redraws,
    )
