"""Confidence-network inputs: ALR transform, TCP targets, assembly."""

import math

import numpy as np
import pytest

from hypnoconf.core_data import UNKNOWN, majority_softmax, predicted_hypnogram
from hypnoconf.features import (
    FEATURE_DIM,
    alr_transform,
    assemble_features,
    tcp_target,
)

from conftest import make_recording, random_recording


class TestAlr:
    def test_uniform_is_zero(self):
        np.testing.assert_allclose(alr_transform(np.full(5, 0.2)), 0.0, atol=1e-12)

    def test_worked_example(self):
        got = alr_transform(np.array([0.4, 0.1, 0.1, 0.1, 0.3]))
        expected = [math.log(4 / 3), math.log(1 / 3), math.log(1 / 3), math.log(1 / 3)]
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_one_hot_is_finite(self):
        got = alr_transform(np.array([1.0, 0.0, 0.0, 0.0, 0.0]))
        assert np.all(np.isfinite(got))
        # first component is the log of the clamped ratio, huge but finite
        assert got[0] > math.log(1e6)
        np.testing.assert_allclose(got[1:], 0.0, atol=1e-12)

    def test_scale_invariance(self, rng):
        # scaling all (unclamped) components then renormalizing is a no-op
        for _ in range(25):
            row = rng.uniform(0.01, 1.0, size=5)
            row /= row.sum()
            c = rng.uniform(0.1, 10.0)
            scaled = row * c / (row * c).sum()
            np.testing.assert_allclose(
                alr_transform(row), alr_transform(scaled), atol=1e-10
            )

    def test_matrix_input(self, rng):
        rows = rng.dirichlet(np.ones(5), size=7)
        got = alr_transform(rows)
        assert got.shape == (7, 4)
        for t in range(7):
            np.testing.assert_allclose(got[t], alr_transform(rows[t]), atol=0)


class TestTcpTarget:
    def test_correct_prediction(self):
        assert tcp_target(np.array([0.1, 0.6, 0.1, 0.1, 0.1]), 1) == 0.6

    def test_misclassified_below_max(self):
        got = tcp_target(np.array([0.2, 0.5, 0.1, 0.1, 0.1]), 0)
        assert got == pytest.approx(0.2)
        assert got < 0.5

    def test_unknown_is_zero(self):
        assert tcp_target(np.array([0.2] * 5), UNKNOWN) == 0.0

    def test_never_exceeds_max(self, rng):
        for _ in range(50):
            row = rng.dirichlet(np.ones(5))
            label = int(rng.integers(0, 5))
            tcp = tcp_target(row, label)
            assert tcp <= row.max()
            assert (tcp == row.max()) == (label == int(row.argmax()))


class TestAssemble:
    def test_single_epoch_layout(self):
        softmax = [[0.1, 0.6, 0.1, 0.1, 0.1]]
        hidden = [[1.0, 2.0, 3.0, 4.0, 5.0]]
        rec = make_recording(softmax, labels=[1], hidden=hidden)
        (seq,) = assemble_features(rec)
        assert seq.features.shape == (1, FEATURE_DIM)
        np.testing.assert_allclose(
            seq.features[0, 0:4], alr_transform(np.asarray(softmax[0], dtype=np.float64))
        )
        np.testing.assert_array_equal(seq.features[0, 4:9], [0, 1, 0, 0, 0])
        np.testing.assert_allclose(seq.features[0, 9:14], hidden[0], atol=1e-6)
        np.testing.assert_allclose(seq.targets, [0.6], atol=1e-7)

    def test_pairs_share_class_code(self, rng):
        rec = random_recording(rng, n_pairs=2, n_epochs=20)
        seq_a, seq_b = assemble_features(rec)
        np.testing.assert_array_equal(seq_a.features[:, 4:9], seq_b.features[:, 4:9])
        assert (seq_a.features[:, 4:9].sum(axis=1) == 1).all()

    def test_recomposition(self, rng):
        rec = random_recording(rng, n_pairs=3, n_epochs=25, unknown_every=6)
        sequences = assemble_features(rec)
        assert len(sequences) == 3
        majority = majority_softmax(rec)
        predicted = predicted_hypnogram(rec)
        for m, seq in enumerate(sequences):
            assert seq.pair_index == m
            assert seq.features.shape == (25, FEATURE_DIM)
            np.testing.assert_allclose(
                seq.features[:, 0:4],
                alr_transform(rec.softmax[m].astype(np.float64)),
                atol=0,
            )
            code = np.zeros((25, 5))
            code[np.arange(25), predicted] = 1
            np.testing.assert_array_equal(seq.features[:, 4:9], code)
            for t in range(25):
                assert seq.targets[t] == pytest.approx(
                    tcp_target(majority[t], int(rec.labels[t])), abs=0
                )

    def test_targets_absent_without_labels(self, rng):
        rec = random_recording(rng)
        rec.labels = None
        (seq, _) = assemble_features(rec)
        assert seq.targets is None

    def test_requires_hiddens(self, rng):
        rec = random_recording(rng)
        rec.hidden = None
        with pytest.raises(ValueError, match="hidden"):
            assemble_features(rec)

    def test_deterministic(self, rng):
        rec = random_recording(rng)
        a = assemble_features(rec)
        b = assemble_features(rec)
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.features, sb.features)
            np.testing.assert_array_equal(sa.targets, sb.targets)
