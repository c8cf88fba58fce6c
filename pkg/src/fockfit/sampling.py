"""Simulated Fock-measurement experiments: multinomial count histograms
drawn from a model distribution with reproducible, independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import FockHistogram
from .model import FockDistribution

__all__ = ["SeedSpec", "sample_histogram"]


@dataclass(frozen=True)
class SeedSpec:
    """Addresses one reproducible random stream.

    Distinct (master_seed, stream_index) pairs give statistically
    independent streams; the child state is derived by hashing the pair,
    so results do not depend on thread scheduling or call order.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be >= 0")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index,))
        )


def sample_histogram(d: FockDistribution, n_shots: int, seed: SeedSpec) -> FockHistogram:
    """Draw a multinomial histogram of ``n_shots`` measurements from ``d``.

    Sampled by the conditional-binomial decomposition: bin i receives a
    binomial draw of the shots still unassigned, with success probability
    p_i renormalized by the remaining tail mass; the overflow bin absorbs
    whatever is left, so the counts always sum to n_shots exactly.
    """
    if n_shots < 1:
        raise ValueError(f"n_shots must be >= 1, got {n_shots}")
    rng = seed.generator()
    probs = d.probs + (d.overflow,)
    counts = [0] * len(probs)
    remaining = n_shots
    tail = 1.0
    for i in range(len(probs) - 1):
        if remaining == 0 or tail <= 0.0:
            break
        p = min(max(probs[i] / tail, 0.0), 1.0)
        k = int(rng.binomial(remaining, p))
        counts[i] = k
        remaining -= k
        tail -= probs[i]
    counts[-1] = remaining
    return FockHistogram(tuple(counts[:-1]), counts[-1], n_shots)
