"""Shared independent oracles and small utilities for the test suite.

Everything here is deliberately implemented from first principles, separate
from the library code paths it checks.
"""

from __future__ import annotations

import numpy as np

from fxchain.registry import FxChain

POOL = (
    "three_band_equalizer", "compressor", "stereo_widener", "gain", "panner",
    "distortion", "reverb", "delay", "limiter",
)


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Textbook average ranking: tied values share the mean of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_values = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_values[j + 1] == sorted_values[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_oracle(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman correlation as Pearson on average ranks, from scratch."""
    ra = average_ranks(a)
    rb = average_ranks(b)
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    return float(np.sum(ra * rb) / np.sqrt(np.sum(ra * ra) * np.sum(rb * rb)))


def rank_vector(chain: FxChain) -> np.ndarray:
    """Pool-position vector: 1-based position if present, else 10."""
    position = {tool: i + 1 for i, tool in enumerate(chain.tools)}
    return np.array([position.get(name, 10) for name in POOL], dtype=np.float64)


def random_chain_pair(rng, max_length=9):
    """Two independent random chains (structure only, no parameters)."""
    from fxchain.corpus import sample_chain

    la = int(rng.integers(1, max_length + 1))
    lb = int(rng.integers(1, max_length + 1))
    return sample_chain(rng, la, "coarse"), sample_chain(rng, lb, "coarse")
