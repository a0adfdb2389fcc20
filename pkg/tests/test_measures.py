"""Uncertainty measures against an independent pure-Python oracle."""

import math

import numpy as np
import pytest

from hypnoconf.measures import (
    MEASURES,
    compute_all_measures,
    compute_measure,
    fractional_rank,
    read_scores_csv,
    write_scores_csv,
)

from conftest import make_recording, random_softmax_grid

# ---------------------------------------------------------------------------
# Oracle: scalar reimplementation with plain loops and the math module only.
# ---------------------------------------------------------------------------


def oracle_epoch(grid_t):
    """All five distributional measures for one epoch; grid_t is M rows of 5."""
    M = len(grid_t)
    ent = 0.0
    ratio = 0.0
    spread = 0.0
    for row in grid_t:
        peak = max(row)
        for p in row:
            if p > 0:
                ent -= p * math.log2(p)
            ratio += p / peak / 5.0
        spread += sum(abs(p - 0.2) for p in row) / 4.0
    majority = [sum(row[k] for row in grid_t) / M for k in range(5)]
    return {
        "entropy_avg": ent / M,
        "ratio_avg": ratio / M,
        "std_avg": spread / M,
        "max_majority": max(majority),
        "std_majority": sum(abs(q - 0.2) for q in majority) / 4.0,
    }


def oracle_rank(values):
    """Ascending fractional ranks with tie means, via sorting index pairs."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j + 2) / 2.0  # ranks are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank / n
        i = j + 1
    return ranks


def oracle_measures(grid):
    """grid: (M, T, 5) nested lists -> dict measure -> list of raw values."""
    M = len(grid)
    T = len(grid[0])
    out = {m: [] for m in MEASURES}
    for t in range(T):
        epoch = oracle_epoch([grid[m][t] for m in range(M)])
        for name, value in epoch.items():
            out[name].append(value)
    out["pct_max_majority"] = oracle_rank([-v for v in out["max_majority"]])
    out["pct_std_majority"] = oracle_rank([-v for v in out["std_majority"]])
    return out


ORIENTATION = {
    "entropy_avg": 1.0,
    "ratio_avg": 1.0,
    "std_avg": -1.0,
    "max_majority": -1.0,
    "std_majority": -1.0,
    "pct_max_majority": 1.0,
    "pct_std_majority": 1.0,
}


class TestWorkedValues:
    def test_uniform_softmax(self):
        rec = make_recording([[0.2] * 5])
        expected = {
            "entropy_avg": math.log2(5),
            "ratio_avg": 1.0,
            "std_avg": 0.0,
            "max_majority": 0.2,
            "std_majority": 0.0,
        }
        for name, value in expected.items():
            got = compute_measure(name, rec).raw_values[0]
            assert got == pytest.approx(value, abs=1e-6)

    def test_one_hot_softmax(self):
        rec = make_recording([[1, 0, 0, 0, 0]])
        expected = {
            "entropy_avg": 0.0,
            "ratio_avg": 0.2,
            "std_avg": 0.4,
            "max_majority": 1.0,
            "std_majority": 0.4,
        }
        for name, value in expected.items():
            got = compute_measure(name, rec).raw_values[0]
            assert got == pytest.approx(value, abs=1e-6)

    def test_scalar_examples(self):
        rec = make_recording([[0.5, 0.2, 0.1, 0.1, 0.1]])
        assert compute_measure("ratio_avg", rec).raw_values[0] == pytest.approx(
            0.4, abs=1e-6
        )
        rec = make_recording([[0.6, 0.1, 0.1, 0.1, 0.1]])
        assert compute_measure("std_avg", rec).raw_values[0] == pytest.approx(
            0.2, abs=1e-6
        )

    def test_unknown_measure_rejected(self):
        rec = make_recording([[0.2] * 5])
        with pytest.raises(ValueError, match="unknown measure"):
            compute_measure("bogus", rec)


class TestOracleEquivalence:
    def test_random_grids_match_oracle(self, rng):
        for trial in range(60):
            M = int(rng.integers(1, 4))
            T = int(rng.integers(1, 25))
            softmax = random_softmax_grid(rng, M, T)
            rec = make_recording(softmax)
            expected = oracle_measures(softmax.astype(np.float64).tolist())
            for name in MEASURES:
                series = compute_measure(name, rec)
                np.testing.assert_allclose(
                    series.raw_values, expected[name], rtol=0, atol=1e-12
                )
                np.testing.assert_allclose(
                    series.scores,
                    ORIENTATION[name] * series.raw_values,
                    rtol=0,
                    atol=0,
                )

    def test_value_ranges(self, rng):
        # float32 rows sum to 1 only within ~3e-7, so allow matching slack
        for _ in range(30):
            rec = make_recording(random_softmax_grid(rng, int(rng.integers(1, 4)), 20))
            eps = 1e-6
            bounds = {
                "entropy_avg": (0.0, math.log2(5)),
                "ratio_avg": (0.2, 1.0),
                "std_avg": (0.0, 0.4),
                "max_majority": (0.2, 1.0),
                "std_majority": (0.0, 0.4),
                "pct_max_majority": (0.0, 1.0),
                "pct_std_majority": (0.0, 1.0),
            }
            for name, (lo, hi) in bounds.items():
                raw = compute_measure(name, rec).raw_values
                assert raw.min() >= lo - eps, name
                assert raw.max() <= hi + eps, name
                if name.startswith("pct"):
                    assert raw.min() > 0.0

    def test_pair_permutation_invariance(self, rng):
        softmax = random_softmax_grid(rng, 3, 15)
        rec = make_recording(softmax)
        perm = make_recording(softmax[[2, 0, 1]].copy())
        for name in MEASURES:
            np.testing.assert_allclose(
                compute_measure(name, rec).raw_values,
                compute_measure(name, perm).raw_values,
                atol=1e-12,
            )

    def test_peaking_never_raises_entropy_score(self, rng):
        # moving mass from the non-max classes onto the max (same argmax)
        for _ in range(40):
            row = rng.uniform(0.05, 1.0, size=5)
            row /= row.sum()
            k = int(row.argmax())
            lam = rng.uniform(0.0, 1.0)
            peaked = row * (1 - lam)
            peaked[k] = row[k] + lam * (1 - row[k])
            base = make_recording([row.tolist()])
            more = make_recording([peaked.tolist()])
            s0 = compute_measure("entropy_avg", base).scores[0]
            s1 = compute_measure("entropy_avg", more).scores[0]
            assert s1 <= s0 + 1e-9


class TestRanks:
    def test_fractional_rank_ties(self):
        values = np.array([3.0, 1.0, 3.0, 2.0])
        np.testing.assert_allclose(
            fractional_rank(values), [3.5 / 4, 1 / 4, 3.5 / 4, 2 / 4]
        )

    def test_pct_most_uncertain_scores_highest(self, rng):
        softmax = random_softmax_grid(rng, 1, 12)
        rec = make_recording(softmax)
        mu = compute_measure("max_majority", rec).raw_values
        pct = compute_measure("pct_max_majority", rec).raw_values
        assert pct[np.argmin(mu)] == pct.max()
        assert pct[np.argmax(mu)] == pct.min()


class TestCsvRoundTrip:
    def test_write_read(self, rng, tmp_path):
        rec = make_recording(random_softmax_grid(rng, 2, 9), recording_id="abc")
        series = compute_all_measures(rec)
        path = tmp_path / "scores.csv"
        with open(path, "w") as fh:
            write_scores_csv(series, fh)
        with open(path) as fh:
            loaded = read_scores_csv(fh)
        assert {s.measure for s in loaded} == set(MEASURES)
        by_measure = {s.measure: s for s in loaded}
        for s in series:
            np.testing.assert_array_equal(by_measure[s.measure].raw_values, s.raw_values)
            np.testing.assert_array_equal(by_measure[s.measure].scores, s.scores)
