"""Synthetic cohorts: Markov hypnograms plus difficulty-modulated mock
classifier outputs, so every downstream stage is testable without clinical
data.

Each recording draws a smoothed per-epoch difficulty in [0, 1].  Difficult
epochs are (a) more likely to be mispredicted (the mock classifier's argmax
is flipped to a physiologically adjacent stage) and (b) given flatter
softmax outputs, which creates contiguous low-confidence stretches like the
discordant runs seen in real predicted hypnograms.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core_data import (
    DIAGNOSIS_CODES,
    N_STAGES,
    UNKNOWN,
    W,
    Dataset,
    Recording,
)

# Physiologically ordered stage adjacency: W-N1-N2-N3 plus N1-REM and N2-REM.
ADJACENT = {
    0: (1,),          # W  -> N1
    1: (0, 2, 4),     # N1 -> W, N2, REM
    2: (1, 3, 4),     # N2 -> N1, N3, REM
    3: (2,),          # N3 -> N2
    4: (1, 2),        # REM -> N1, N2
}

DEFAULT_SPLIT_RATIOS = (0.8, 0.1, 0.1)

# Softmax concentration bounds; generator tuning, not ground truth.
ALPHA_MAX = 30.0
ALPHA_MIN = 2.0
PAIR_NOISE = 0.15
HIDDEN_NOISE = 0.05


@dataclass(frozen=True)
class GenConfig:
    n_recordings: int = 10
    epochs_per_recording: int = 960
    n_pairs: int = 2
    target_error_rate: float = 0.18
    stay_probability: float = 0.85
    difficulty_window: int = 10
    unknown_rate: float = 0.02
    seed: int = 0

    def validate(self) -> None:
        if self.n_recordings < 0 or self.epochs_per_recording < 1 or self.n_pairs < 1:
            raise ValueError("counts must be positive (n_recordings may be 0)")
        if not 0.0 <= self.target_error_rate <= 1.0:
            raise ValueError("target_error_rate must be in [0, 1]")
        if not 0.0 < self.stay_probability < 1.0:
            raise ValueError("stay_probability must be in (0, 1)")
        if self.difficulty_window < 1:
            raise ValueError("difficulty_window must be >= 1")
        if not 0.0 <= self.unknown_rate < 1.0:
            raise ValueError("unknown_rate must be in [0, 1)")


def _markov_walk(T: int, stay_probability: float, rng: np.random.Generator) -> np.ndarray:
    """First-order Markov chain over the five stages, starting at W."""
    stages = np.empty(T, dtype=np.uint8)
    if T == 0:
        return stages
    stay = rng.uniform(size=T)
    pick = rng.uniform(size=T)
    state = W
    for t in range(T):
        stages[t] = state
        if stay[t] >= stay_probability:
            nbrs = ADJACENT[state]
            state = nbrs[int(pick[t] * len(nbrs))]
    return stages


def gen_hypnogram(T: int, stay_probability: float, seed: int) -> np.ndarray:
    """Deterministic synthetic hypnogram; T=0 yields an empty sequence."""
    if T < 0:
        raise ValueError("T must be >= 0")
    if not 0.0 < stay_probability < 1.0:
        raise ValueError("stay_probability must be in (0, 1)")
    return _markov_walk(T, stay_probability, np.random.default_rng(seed))


def _smooth_difficulty(raw: np.ndarray, window: int) -> np.ndarray:
    window = min(window, raw.size)  # convolve('same') needs kernel <= signal
    if window <= 1 or raw.size == 0:
        return raw.copy()
    kernel = np.ones(window)
    sums = np.convolve(raw, kernel, mode="same")
    counts = np.convolve(np.ones_like(raw), kernel, mode="same")
    return sums / counts


def _flip_probabilities(difficulty: np.ndarray, rate: float) -> np.ndarray:
    """Monotone flip probabilities with empirical mean exactly `rate`.

    Logistic in difficulty; the location is solved by bisection so that the
    recording-level expected misclassification matches the target, while the
    small scale keeps errors concentrated on the most difficult epochs.
    """
    if rate <= 0.0:
        return np.zeros_like(difficulty)
    if rate >= 1.0:
        return np.ones_like(difficulty)
    scale = max(0.5 * float(np.std(difficulty)), 1e-3)
    lo = float(difficulty.min()) - 40.0 * scale
    hi = float(difficulty.max()) + 40.0 * scale
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mean = float(np.mean(1.0 / (1.0 + np.exp(-(difficulty - mid) / scale))))
        if mean > rate:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    return 1.0 / (1.0 + np.exp(-(difficulty - theta) / scale))


def _mock_outputs(labels, difficulty, n_pairs, rate, rng):
    """Predicted stages, per-pair softmaxes, and hiddens for one recording."""
    T = labels.shape[0]
    flip_p = _flip_probabilities(difficulty, rate)
    flip = rng.uniform(size=T) < flip_p
    pick = rng.uniform(size=T)
    predicted = labels.astype(np.int64).copy()
    for t in np.flatnonzero(flip):
        nbrs = ADJACENT[int(labels[t])]
        predicted[t] = nbrs[int(pick[t] * len(nbrs))]

    # Shared per-epoch distribution concentrated on the predicted stage;
    # flatter where the epoch is difficult.
    alpha_peak = ALPHA_MAX - (ALPHA_MAX - ALPHA_MIN) * difficulty
    alpha = np.ones((T, N_STAGES))
    alpha[np.arange(T), predicted] += alpha_peak
    gammas = rng.gamma(shape=alpha)
    shared = gammas / gammas.sum(axis=1, keepdims=True)

    logits = np.log(shared)[None, :, :] + rng.normal(0.0, PAIR_NOISE, (n_pairs, T, N_STAGES))
    logits -= logits.max(axis=2, keepdims=True)
    softmax = np.exp(logits)
    softmax /= softmax.sum(axis=2, keepdims=True)

    # The majority argmax must equal the intended prediction exactly; where
    # sampling noise broke that, swap the two components in every pair.
    majority = softmax.mean(axis=0)
    top = majority.argmax(axis=1)
    for t in np.flatnonzero(top != predicted):
        a, b = int(predicted[t]), int(top[t])
        softmax[:, t, [a, b]] = softmax[:, t, [b, a]]

    log_soft = np.log(softmax)
    hidden = log_soft - log_soft.mean(axis=2, keepdims=True)
    hidden += rng.normal(0.0, HIDDEN_NOISE, hidden.shape)
    return predicted, softmax.astype(np.float32), hidden.astype(np.float32), flip


def _draw_diagnoses(rng: np.random.Generator) -> frozenset:
    if rng.uniform() < 0.15:
        return frozenset({"HE"})
    disorders = [c for c in DIAGNOSIS_CODES if c != "HE"]
    k = 1 if rng.uniform() < 0.6 else 2
    picked = rng.choice(len(disorders), size=k, replace=False)
    return frozenset(disorders[i] for i in picked)


def _allocate(n: int, ratios) -> list:
    """Largest-remainder allocation of n items over ratio buckets."""
    ratios = np.asarray(ratios, dtype=np.float64)
    base = np.floor(ratios * n).astype(int)
    remainder = ratios * n - base
    for _ in range(n - int(base.sum())):
        i = int(np.argmax(remainder))
        base[i] += 1
        remainder[i] = -1.0
    return base.tolist()


def split_manifest(dataset: Dataset, ratios, seed: int) -> dict:
    """Assign ID_TRAIN/ID_VAL/ID_TEST per subject, never splitting a subject.

    `ratios` is a (train, val, test) triple summing to 1.  Returns a mapping
    recording_id -> domain_tag.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three non-negative fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    subjects = list(dataset.subjects().keys())
    n_buckets = sum(1 for r in ratios if r > 0)
    if len(subjects) < n_buckets:
        raise ValueError(
            f"{len(subjects)} subject(s) cannot fill {n_buckets} non-empty splits"
        )
    counts = _allocate(len(subjects), ratios)
    # Guarantee every requested split is non-empty.
    for i, r in enumerate(ratios):
        if r > 0 and counts[i] == 0:
            j = int(np.argmax(counts))
            counts[j] -= 1
            counts[i] += 1
    order = np.random.default_rng(seed).permutation(len(subjects))
    tags = ("ID_TRAIN", "ID_VAL", "ID_TEST")
    subject_tag = {}
    pos = 0
    for tag, count in zip(tags, counts):
        for i in order[pos : pos + count]:
            subject_tag[subjects[i]] = tag
        pos += count
    return {
        rec.recording_id: subject_tag[rec.subject_id] for rec in dataset.recordings
    }


def with_tags(dataset: Dataset, assignment: dict) -> Dataset:
    """New Dataset with domain tags replaced per the assignment."""
    return Dataset(
        [dataclasses.replace(rec, domain_tag=assignment[rec.recording_id]) for rec in dataset]
    )


def gen_cohort(config: GenConfig, with_difficulty: bool = False):
    """Generate a full synthetic cohort; byte-deterministic given the config.

    Domain tags are assigned per subject with fixed 0.8/0.1/0.1 ratios
    (lenient for tiny cohorts).  With `with_difficulty`, also returns the
    per-recording smoothed difficulty series keyed by recording_id.
    """
    config.validate()
    root = np.random.SeedSequence(config.seed)
    streams = root.spawn(config.n_recordings)
    recordings = []
    difficulties = {}
    T = config.epochs_per_recording
    for r in range(config.n_recordings):
        rng = np.random.default_rng(streams[r])
        labels = _markov_walk(T, config.stay_probability, rng)
        difficulty = _smooth_difficulty(rng.uniform(size=T), config.difficulty_window)
        _, softmax, hidden, _ = _mock_outputs(
            labels, difficulty, config.n_pairs, config.target_error_rate, rng
        )
        stored = labels.copy()
        if config.unknown_rate > 0:
            stored[rng.uniform(size=T) < config.unknown_rate] = UNKNOWN
        rec = Recording(
            recording_id=f"rec{r:04d}",
            subject_id=f"subj{r:04d}",
            scorer_id=f"scorer{r % 5:02d}",
            domain_tag="ID_TRAIN",
            diagnoses=_draw_diagnoses(rng),
            labels=stored,
            softmax=softmax,
            hidden=hidden,
        )
        recordings.append(rec)
        difficulties[rec.recording_id] = difficulty
    dataset = Dataset(recordings)

    counts = _allocate(len(recordings), DEFAULT_SPLIT_RATIOS)
    order = np.random.default_rng(root.spawn(1)[0]).permutation(len(recordings))
    tags = ("ID_TRAIN", "ID_VAL", "ID_TEST")
    pos = 0
    for tag, count in zip(tags, counts):
        for i in order[pos : pos + count]:
            recordings[i].domain_tag = tag
        pos += count

    if with_difficulty:
        return dataset, difficulties
    return dataset
