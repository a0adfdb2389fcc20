"""Classification metrics and ROC/PR against independent oracles."""

import numpy as np
import pytest

from hypnoconf.metrics import (
    classification_report,
    discordance_roc_pr,
    subject_aggregate,
)

# ---------------------------------------------------------------------------
# Oracles: plain-Python counting, no numpy in the arithmetic.
# ---------------------------------------------------------------------------


def oracle_report(true, pred):
    true = [int(t) for t in true]
    pred = [int(p) for p in pred]
    pairs = [(t, p) for t, p in zip(true, pred) if t != 255]
    n = len(pairs)
    acc = sum(1 for t, p in pairs if t == p) / n
    row = [sum(1 for t, _ in pairs if t == c) for c in range(5)]
    col = [sum(1 for _, p in pairs if p == c) for c in range(5)]
    p_e = sum(row[c] * col[c] for c in range(5)) / (n * n)
    if p_e >= 1.0 - 1e-15:
        kappa = 1.0 if acc == 1.0 else 0.0
    else:
        kappa = (acc - p_e) / (1 - p_e)
    f1w = 0.0
    for c in range(5):
        if row[c] == 0:
            continue
        tp = sum(1 for t, p in pairs if t == c and p == c)
        precision = tp / col[c] if col[c] else 0.0
        recall = tp / row[c]
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        f1w += row[c] / n * f1
    return acc, f1w, kappa


def oracle_auroc(scores, targets):
    """Pairwise comparisons; ties count one half."""
    pos = [s for s, y in zip(scores, targets) if y]
    neg = [s for s, y in zip(scores, targets) if not y]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def trapezoid(points):
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


class TestClassificationReport:
    def test_perfect_agreement(self):
        seq = np.array([0, 1, 2, 3, 4, 2, 1])
        rep = classification_report(seq, seq)
        assert rep.acc == rep.f1w == rep.kappa == 1.0
        assert rep.n_epochs == 7

    def test_worked_example(self):
        true = np.array([0, 0, 2, 2, 4])
        pred = np.array([0, 2, 2, 2, 4])
        rep = classification_report(true, pred)
        assert rep.acc == pytest.approx(0.8, abs=1e-12)
        assert rep.kappa == pytest.approx((0.8 - 0.36) / 0.64, abs=1e-12)
        assert rep.f1w == pytest.approx(0.4 * (2 / 3) + 0.4 * 0.8 + 0.2 * 1.0, abs=1e-12)
        assert rep.confusion.sum() == rep.n_epochs

    def test_random_pairs_match_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 60))
            true = rng.integers(0, 5, size=n)
            pred = rng.integers(0, 5, size=n)
            rep = classification_report(true, pred)
            acc, f1w, kappa = oracle_report(true, pred)
            assert rep.acc == pytest.approx(acc, abs=1e-12)
            assert rep.f1w == pytest.approx(f1w, abs=1e-12)
            assert rep.kappa == pytest.approx(kappa, abs=1e-12)

    def test_matches_sklearn(self, rng):
        sklearn = pytest.importorskip("sklearn.metrics")
        for _ in range(20):
            n = int(rng.integers(20, 80))
            true = rng.integers(0, 5, size=n)
            pred = rng.integers(0, 5, size=n)
            if len(np.unique(true)) < 2 or len(np.unique(pred)) < 2:
                continue
            rep = classification_report(true, pred)
            assert rep.kappa == pytest.approx(
                sklearn.cohen_kappa_score(true, pred), abs=1e-10
            )
            assert rep.f1w == pytest.approx(
                sklearn.f1_score(true, pred, average="weighted", zero_division=0),
                abs=1e-10,
            )

    def test_unknown_excluded(self):
        true = np.array([0, 255, 1, 255])
        pred = np.array([0, 3, 1, 2])
        rep = classification_report(true, pred)
        assert rep.n_epochs == 2
        assert rep.acc == 1.0

    def test_all_unknown_rejected(self):
        with pytest.raises(ValueError, match="Unknown"):
            classification_report(np.array([255, 255]), np.array([0, 1]))

    def test_degenerate_single_class(self):
        ones = np.array([2, 2, 2])
        rep = classification_report(ones, ones)
        assert rep.degenerate
        assert rep.kappa == 1.0
        rep = classification_report(np.array([2, 2, 2]), np.array([2, 2, 1]))
        assert not rep.degenerate  # predictions use two classes
        true_const = classification_report(np.array([1, 1]), np.array([1, 1]))
        assert true_const.kappa == 1.0

    def test_kappa_zero_when_chance_level(self):
        # p_o equals p_e: balanced two-class confusion with independent rows
        true = np.array([0, 0, 1, 1])
        pred = np.array([0, 1, 0, 1])
        rep = classification_report(true, pred)
        assert rep.kappa == pytest.approx(0.0, abs=1e-12)

    def test_label_permutation_symmetry(self, rng):
        perm = np.array([3, 4, 0, 2, 1])
        true = rng.integers(0, 5, size=50)
        pred = rng.integers(0, 5, size=50)
        a = classification_report(true, pred)
        b = classification_report(perm[true], perm[pred])
        assert a.acc == pytest.approx(b.acc, abs=1e-12)
        assert a.f1w == pytest.approx(b.f1w, abs=1e-12)
        assert a.kappa == pytest.approx(b.kappa, abs=1e-12)


class TestSubjectAggregate:
    def _report(self, acc, f1w, kappa):
        rep = classification_report(np.array([0, 1]), np.array([0, 1]))
        rep.acc, rep.f1w, rep.kappa = acc, f1w, kappa
        return rep

    def test_single_subject(self):
        agg = subject_aggregate({"s": self._report(0.8, 0.7, 0.6)})
        assert agg["mean"] == agg["median"] == {"acc": 0.8, "f1w": 0.7, "kappa": 0.6}

    def test_two_point_median(self):
        agg = subject_aggregate(
            {"a": self._report(0.5, 0.5, 0.6), "b": self._report(0.7, 0.9, 0.8)}
        )
        assert agg["mean"]["kappa"] == pytest.approx(0.7)
        assert agg["median"]["kappa"] == pytest.approx(0.7)

    def test_odd_median(self):
        agg = subject_aggregate(
            {
                "a": self._report(1, 1, 0.5),
                "b": self._report(1, 1, 0.7),
                "c": self._report(1, 1, 0.9),
            }
        )
        assert agg["median"]["kappa"] == pytest.approx(0.7)


class TestRocPr:
    def test_perfect_separation(self):
        true = np.array([0, 0, 1, 1])
        pred = np.array([0, 0, 2, 2])  # two discordant epochs
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        res = discordance_roc_pr(scores, true, pred)
        assert res.auroc == 1.0
        assert res.aupr == 1.0
        assert (res.n_pos, res.n_neg) == (2, 2)

    def test_constant_scores(self):
        true = np.array([0, 0, 1, 1])
        pred = np.array([0, 0, 2, 1])
        res = discordance_roc_pr(np.full(4, 0.5), true, pred)
        assert res.auroc == 0.5

    def test_pairwise_example(self):
        # targets (1,0,0,1), scores (0.9,0.2,0.8,0.7): 3 of 4 pairs won
        true = np.array([0, 0, 0, 0])
        pred = np.array([1, 0, 0, 1])
        scores = np.array([0.9, 0.2, 0.8, 0.7])
        res = discordance_roc_pr(scores, true, pred)
        assert res.auroc == pytest.approx(0.75, abs=1e-12)

    def test_matches_pairwise_oracle(self, rng):
        for _ in range(40):
            n = int(rng.integers(5, 200))
            true = rng.integers(0, 5, size=n)
            pred = rng.integers(0, 5, size=n)
            targets = (true != pred).astype(int)
            if targets.min() == targets.max():
                continue
            scores = np.round(rng.uniform(size=n), 2)  # force some ties
            res = discordance_roc_pr(scores, true, pred)
            assert res.auroc == pytest.approx(
                oracle_auroc(scores.tolist(), targets.tolist()), abs=1e-9
            )

    def test_roc_trapezoid_equals_rank_statistic(self, rng):
        for _ in range(25):
            n = int(rng.integers(10, 200))
            true = rng.integers(0, 2, size=n)
            pred = np.zeros(n, dtype=int)
            if (true != pred).all() or (true == pred).all():
                continue
            scores = np.round(rng.uniform(size=n), 1)
            res = discordance_roc_pr(scores, true, pred)
            assert trapezoid(res.roc_points) == pytest.approx(res.auroc, abs=1e-9)

    def test_matches_sklearn_auc(self, rng):
        sklearn = pytest.importorskip("sklearn.metrics")
        for _ in range(15):
            n = 120
            true = rng.integers(0, 5, size=n)
            pred = rng.integers(0, 5, size=n)
            y = (true != pred).astype(int)
            if y.min() == y.max():
                continue
            scores = rng.uniform(size=n)
            res = discordance_roc_pr(scores, true, pred)
            assert res.auroc == pytest.approx(
                sklearn.roc_auc_score(y, scores), abs=1e-10
            )
            assert res.aupr == pytest.approx(
                sklearn.average_precision_score(y, scores), abs=1e-10
            )

    def test_monotone_transform_invariance(self, rng):
        true = rng.integers(0, 5, size=100)
        pred = rng.integers(0, 5, size=100)
        scores = rng.uniform(size=100)
        a = discordance_roc_pr(scores, true, pred)
        b = discordance_roc_pr(np.exp(3 * scores) + 7, true, pred)
        assert a.auroc == pytest.approx(b.auroc, abs=1e-12)
        assert a.aupr == pytest.approx(b.aupr, abs=1e-12)

    def test_curves_monotone_in_sweep(self, rng):
        true = rng.integers(0, 5, size=150)
        pred = rng.integers(0, 5, size=150)
        scores = np.round(rng.uniform(size=150), 2)
        res = discordance_roc_pr(scores, true, pred)
        fpr = [p[0] for p in res.roc_points]
        tpr = [p[1] for p in res.roc_points]
        recall = [p[0] for p in res.pr_points]
        assert all(a <= b for a, b in zip(fpr, fpr[1:]))
        assert all(a <= b for a, b in zip(tpr, tpr[1:]))
        assert all(a <= b for a, b in zip(recall, recall[1:]))
        assert res.roc_points[0] == (0.0, 0.0)
        assert res.roc_points[-1] == (1.0, 1.0)

    def test_single_class_rejected(self):
        true = np.array([0, 1])
        with pytest.raises(ValueError, match="discordant"):
            discordance_roc_pr(np.array([0.5, 0.6]), true, true)
