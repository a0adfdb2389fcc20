"""Shared builders for synthetic recordings and datasets."""

import numpy as np
import pytest

from hypnoconf.core_data import Recording


def make_recording(
    softmax,
    labels=None,
    hidden=None,
    recording_id="rec0",
    subject_id="subj0",
    domain_tag="ID_TEST",
    diagnoses=(),
):
    """Recording from nested lists or arrays; softmax shape (M, T, 5)."""
    softmax = np.asarray(softmax, dtype=np.float32)
    if softmax.ndim == 2:
        softmax = softmax[None, :, :]
    if hidden is not None:
        hidden = np.asarray(hidden, dtype=np.float32)
        if hidden.ndim == 2:
            hidden = hidden[None, :, :]
    if labels is not None:
        labels = np.asarray(labels, dtype=np.uint8)
    return Recording(
        recording_id=recording_id,
        subject_id=subject_id,
        scorer_id="scorer0",
        domain_tag=domain_tag,
        diagnoses=frozenset(diagnoses),
        labels=labels,
        softmax=softmax,
        hidden=hidden,
    )


def random_softmax_grid(rng, n_pairs, n_epochs):
    """Random positive softmax grid (M, T, 5); rows sum to 1 in float32."""
    raw = rng.uniform(0.05, 1.0, size=(n_pairs, n_epochs, 5))
    raw /= raw.sum(axis=2, keepdims=True)
    return raw.astype(np.float32)


def dyadic_softmax_grid(rng, n_pairs, n_epochs, denom_bits=20):
    """Softmax rows that are exact dyadic rationals summing to exactly 1.

    Every component is a multiple of 2**-denom_bits, so float32 storage and
    float64 summation are both exact; identities that rely on rows summing
    to 1 hold to full precision.
    """
    total = 1 << denom_bits
    counts = rng.multinomial(total - 5, np.full(5, 0.2), size=(n_pairs, n_epochs)) + 1
    return (counts / total).astype(np.float32)


def random_recording(rng, n_pairs=2, n_epochs=30, unknown_every=0, **kwargs):
    softmax = random_softmax_grid(rng, n_pairs, n_epochs)
    hidden = rng.normal(size=(n_pairs, n_epochs, 5)).astype(np.float32)
    labels = rng.integers(0, 5, size=n_epochs).astype(np.uint8)
    if unknown_every:
        labels[::unknown_every] = 255
    return make_recording(softmax, labels=labels, hidden=hidden, **kwargs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
