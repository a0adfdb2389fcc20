"""Simulated physician review guided by per-epoch confidence.

Epochs whose confidence falls strictly below a threshold are flagged for
review; flagged epochs that disagree with the reference scoring are
corrected to it, everything else is left untouched.  Sweeping the threshold
over a fixed grid yields the effort / performance / detection trade-off and
the minimum review effort needed to reach benchmark agreement levels.
Effort percentages pool epochs across all recordings of the split; Unknown
epochs are excluded throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_data import UNKNOWN, predicted_hypnogram
from .metrics import MetricReport, classification_report

BENCHMARK_LEVELS = (80, 85, 90, 95)
BENCHMARK_METRICS = ("acc", "f1w", "kappa")


@dataclass
class ReviewPoint:
    threshold: float
    effort_pct: float
    report: MetricReport
    detection_recall: float


@dataclass
class ReviewCurve:
    thresholds: np.ndarray
    effort_pct: np.ndarray
    acc: np.ndarray
    f1w: np.ndarray
    kappa: np.ndarray
    detection_recall: np.ndarray
    grid_step: float

    def metric(self, name: str) -> np.ndarray:
        if name not in BENCHMARK_METRICS:
            raise ValueError(f"unknown metric {name!r}")
        return getattr(self, name)

    def rows(self) -> list:
        out = []
        for i in range(self.thresholds.shape[0]):
            out.append(
                [
                    repr(float(self.thresholds[i])),
                    repr(float(self.effort_pct[i])),
                    repr(float(self.acc[i])),
                    repr(float(self.f1w[i])),
                    repr(float(self.kappa[i])),
                    repr(float(self.detection_recall[i])),
                ]
            )
        return out


@dataclass
class BenchmarkTable:
    rows: list  # dicts: metric, level, min_effort_pct, threshold

    def as_list(self) -> list:
        return list(self.rows)


def _pool_split(recordings, tcp_scores):
    true_parts, pred_parts, tcp_parts = [], [], []
    for rec in recordings:
        if rec.labels is None:
            raise ValueError(f"{rec.recording_id}: review simulation needs labels")
        tcp = np.asarray(tcp_scores[rec.recording_id], dtype=np.float64)
        if tcp.shape != (rec.n_epochs,):
            raise ValueError(f"{rec.recording_id}: confidence series length mismatch")
        keep = rec.labels != UNKNOWN
        true_parts.append(rec.labels[keep])
        pred_parts.append(predicted_hypnogram(rec)[keep])
        tcp_parts.append(tcp[keep])
    if not true_parts:
        raise ValueError("no recordings to simulate")
    return (
        np.concatenate(true_parts),
        np.concatenate(pred_parts),
        np.concatenate(tcp_parts),
    )


def _simulate(true, pred, tcp, threshold: float) -> ReviewPoint:
    flagged = tcp < threshold  # strict: threshold 0 flags nothing
    discordant = pred != true
    corrected = np.where(flagged & discordant, true, pred)
    n_disc = int(discordant.sum())
    caught = int((flagged & discordant).sum())
    detection = caught / n_disc if n_disc else 1.0
    return ReviewPoint(
        threshold=float(threshold),
        effort_pct=100.0 * float(flagged.sum()) / true.shape[0],
        report=classification_report(true, corrected),
        detection_recall=float(detection),
    )


def simulate_threshold(recordings, tcp_scores: dict, threshold: float) -> ReviewPoint:
    """Review outcome for a single confidence threshold over one split."""
    true, pred, tcp = _pool_split(recordings, tcp_scores)
    return _simulate(true, pred, tcp, threshold)


def sweep(recordings, tcp_scores: dict, grid_step: float = 0.01) -> ReviewCurve:
    """Review outcomes for thresholds 0, step, ..., 1."""
    n_steps = round(1.0 / grid_step)
    if abs(n_steps * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step {grid_step} does not divide 1 evenly")
    true, pred, tcp = _pool_split(recordings, tcp_scores)
    thresholds = np.linspace(0.0, 1.0, n_steps + 1)
    points = [_simulate(true, pred, tcp, t) for t in thresholds]
    return ReviewCurve(
        thresholds=thresholds,
        effort_pct=np.array([p.effort_pct for p in points]),
        acc=np.array([p.report.acc for p in points]),
        f1w=np.array([p.report.f1w for p in points]),
        kappa=np.array([p.report.kappa for p in points]),
        detection_recall=np.array([p.detection_recall for p in points]),
        grid_step=float(grid_step),
    )


def effort_to_benchmark(curve: ReviewCurve, levels=BENCHMARK_LEVELS) -> BenchmarkTable:
    """Minimum review effort to reach each benchmark level per metric.

    Reports the first grid threshold whose post-review metric meets the
    level; no interpolation.  A full review reproduces the reference
    scoring, so every level at or below 100% is reachable.
    """
    rows = []
    for metric in BENCHMARK_METRICS:
        values = curve.metric(metric)
        for level in levels:
            # 1e-9 slack: a ratio that is exactly 85% can round to
            # 84.999999999999993 in floating point and must still count
            hit = np.flatnonzero(values * 100.0 >= level - 1e-9)
            if hit.size == 0:
                raise AssertionError(
                    f"{metric} never reaches {level}%, which a full review precludes"
                )
            i = int(hit[0])
            rows.append(
                {
                    "metric": metric,
                    "level": int(level),
                    "min_effort_pct": float(curve.effort_pct[i]),
                    "threshold": float(curve.thresholds[i]),
                }
            )
    return BenchmarkTable(rows=rows)


def detection_auc(curve: ReviewCurve) -> float:
    """Area under the effort-vs-detection curve (effort as a fraction).

    0.5 corresponds to reviewing epochs in random order.
    """
    x = curve.effort_pct / 100.0
    y = curve.detection_recall
    order = np.argsort(x, kind="stable")
    return float(np.trapezoid(y[order], x[order]))
