"""Classification metrics and discordance-detection evaluation.

Five-class confusion matrix with accuracy, support-weighted F1, and Cohen's
kappa; subject-wise mean/median aggregation; and ROC / precision-recall
analysis where epochs misclassified by the scorer model form the positive
class.  Epochs whose reference stage is Unknown are excluded everywhere
(predicted stages never include Unknown).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_data import N_STAGES, UNKNOWN


@dataclass
class MetricReport:
    confusion: np.ndarray  # (5, 5) counts, rows = true, cols = predicted
    acc: float
    f1w: float
    kappa: float
    n_epochs: int
    degenerate: bool = False  # single-class input forced the kappa convention

    def as_dict(self) -> dict:
        return {
            "acc": self.acc,
            "f1w": self.f1w,
            "kappa": self.kappa,
            "n_epochs": self.n_epochs,
            "degenerate": self.degenerate,
            "confusion": self.confusion.tolist(),
        }


@dataclass
class RocPrResult:
    roc_points: list  # (fpr, tpr), swept from strictest threshold
    pr_points: list  # (recall, precision)
    auroc: float
    aupr: float
    n_pos: int
    n_neg: int

    def as_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "aupr": self.aupr,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
        }


def _drop_unknown(true_labels, predicted_labels, *extras):
    true_labels = np.asarray(true_labels)
    predicted_labels = np.asarray(predicted_labels)
    if true_labels.shape != predicted_labels.shape:
        raise ValueError("label sequences must have equal length")
    keep = true_labels != UNKNOWN
    out = [true_labels[keep], predicted_labels[keep]]
    for extra in extras:
        extra = np.asarray(extra)
        if extra.shape != keep.shape:
            raise ValueError("score sequence must match label length")
        out.append(extra[keep])
    return out


def classification_report(true_labels, predicted_labels) -> MetricReport:
    """Confusion matrix, accuracy, weighted F1, and Cohen's kappa.

    Per-class precision or recall with an empty denominator counts as 0, and
    zero-support classes carry zero weight in F1w.  The degenerate case
    where chance agreement is 1 defines kappa as 1 for perfect agreement and
    0 otherwise.
    """
    true_labels, predicted_labels = _drop_unknown(true_labels, predicted_labels)
    n = true_labels.shape[0]
    if n == 0:
        raise ValueError("no scored epochs left after excluding Unknown")
    if np.any(predicted_labels >= N_STAGES):
        raise ValueError("predicted stages must be one of the five scored stages")

    confusion = np.zeros((N_STAGES, N_STAGES), dtype=np.int64)
    np.add.at(confusion, (true_labels.astype(np.intp), predicted_labels.astype(np.intp)), 1)

    acc = float(np.trace(confusion)) / n
    row = confusion.sum(axis=1).astype(np.float64)  # true-class support
    col = confusion.sum(axis=0).astype(np.float64)  # predicted counts
    p_e = float(row @ col) / (n * n)
    degenerate = p_e >= 1.0 - 1e-15
    if degenerate:
        kappa = 1.0 if acc >= 1.0 else 0.0
    else:
        kappa = (acc - p_e) / (1.0 - p_e)

    weighted = 0.0
    diag = np.diag(confusion).astype(np.float64)
    for c in range(N_STAGES):
        if row[c] == 0:
            continue
        precision = diag[c] / col[c] if col[c] > 0 else 0.0
        recall = diag[c] / row[c]
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        weighted += row[c] * f1
    f1w = weighted / n
    return MetricReport(
        confusion=confusion,
        acc=acc,
        f1w=float(f1w),
        kappa=float(kappa),
        n_epochs=int(n),
        degenerate=degenerate,
    )


def subject_aggregate(reports_by_subject: dict) -> dict:
    """Mean and median of each metric over per-subject reports."""
    if not reports_by_subject:
        raise ValueError("need at least one subject")
    out = {"mean": {}, "median": {}}
    for metric in ("acc", "f1w", "kappa"):
        values = np.array([getattr(r, metric) for r in reports_by_subject.values()])
        out["mean"][metric] = float(values.mean())
        out["median"][metric] = float(np.median(values))
    return out


def _rank_average(values: np.ndarray) -> np.ndarray:
    """Ascending ranks 1..n with exact ties sharing the mean rank."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)))[:-1] + 1
    return (starts + (counts - 1) / 2.0)[inverse]


def discordance_roc_pr(oriented_scores, true_labels, predicted_labels) -> RocPrResult:
    """ROC and PR curves for spotting misclassified epochs by score.

    The positive class is (predicted != true).  AUROC comes from the rank
    statistic (tied scores count one half); AUPR is average precision over
    the descending-score sweep (step interpolation, no trapezoids).
    """
    true_labels, predicted_labels, scores = _drop_unknown(
        true_labels, predicted_labels, oriented_scores
    )
    y = (predicted_labels != true_labels).astype(np.int64)
    n_pos = int(y.sum())
    n_neg = int(y.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one discordant and one concordant epoch")

    scores = scores.astype(np.float64)
    ranks = _rank_average(scores)
    auroc = (float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    # Descending sweep, grouping tied scores at a single operating point.
    order = np.argsort(-scores, kind="stable")
    y_sorted = y[order]
    s_sorted = scores[order]
    boundaries = np.flatnonzero(np.diff(s_sorted)) + 1
    group_ends = np.concatenate([boundaries, [y_sorted.shape[0]]])
    tp = np.cumsum(y_sorted)[group_ends - 1]
    count = group_ends
    fp = count - tp

    roc_points = [(0.0, 0.0)] + [
        (float(f) / n_neg, float(t) / n_pos) for f, t in zip(fp, tp)
    ]
    pr_points = [(0.0, 1.0)]
    aupr = 0.0
    prev_tp = 0
    for t, c in zip(tp, count):
        precision = float(t) / c
        recall = float(t) / n_pos
        pr_points.append((recall, precision))
        aupr += precision * (t - prev_tp) / n_pos
        prev_tp = t
    return RocPrResult(
        roc_points=roc_points,
        pr_points=pr_points,
        auroc=float(auroc),
        aupr=float(aupr),
        n_pos=n_pos,
        n_neg=n_neg,
    )
