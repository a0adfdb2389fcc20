"""Uncertainty-guided review toolkit for automated sleep-stage hypnograms.

Quantifies per-epoch prediction uncertainty from classifier softmax output,
trains an auxiliary LSTM confidence network that regresses the true-class
probability, and simulates confidence-guided physician review to measure
the rescoring effort needed to reach agreement benchmarks.
"""

from . import confnet, core_data, features, measures, metrics, render, review_sim, stats_boot, synthgen
from .core_data import (
    Dataset,
    FormatError,
    Recording,
    ValidationError,
    load_dataset,
    majority_softmax,
    predicted_hypnogram,
    save_dataset,
)
from .synthgen import GenConfig, gen_cohort, gen_hypnogram, split_manifest

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FormatError",
    "GenConfig",
    "Recording",
    "ValidationError",
    "confnet",
    "core_data",
    "features",
    "gen_cohort",
    "gen_hypnogram",
    "load_dataset",
    "majority_softmax",
    "measures",
    "metrics",
    "predicted_hypnogram",
    "render",
    "review_sim",
    "save_dataset",
    "split_manifest",
    "stats_boot",
    "synthgen",
]
