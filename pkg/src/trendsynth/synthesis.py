"""Synthesis stage: alternate library trends and resample their windows.

Randomness is split into independent substreams of one 64-bit seed: the
trend sequence uses ``spawn_key=(0,)`` and the ``k``-th trend of the sequence
uses ``spawn_key=(1, k)``. Sampling trends in any order, serially or in a
thread pool, therefore gives the same panel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import LibraryError, TrendLibrary
from .ingest import ReturnPanel, sim_day_labels
from .trends import DOWN, UP

FIRST_SIGNS = (UP, DOWN, "random")


@dataclass(frozen=True)
class ScenarioSpec:
    target_days: int
    seed: int
    library: TrendLibrary
    first_sign: str = "random"

    def __post_init__(self):
        if self.target_days < 1:
            raise ValueError("target_days must be >= 1")
        if self.first_sign not in FIRST_SIGNS:
            raise ValueError(f"first_sign must be one of {FIRST_SIGNS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class TrendSequence:
    indices: tuple
    signs: tuple

    def __post_init__(self):
        if len(self.indices) != len(self.signs):
            raise ValueError("indices and signs differ in length")
        for a, b in zip(self.signs, self.signs[1:]):
            if a == b:
                raise ValueError("trend signs must alternate")

    def __len__(self):
        return len(self.indices)

    def n_days(self, lib):
        return sum(lib.trends[i].n_days for i in self.indices)

    @classmethod
    def from_indices(cls, lib, indices):
        """Hand-specified sequence; each index must point into ``lib``."""
        indices = [int(i) for i in indices]
        for i in indices:
            if not 0 <= i < len(lib.trends):
                raise LibraryError(f"trend index {i} outside library of {len(lib.trends)} trends")
        return cls(tuple(indices), tuple(lib.trends[i].sign for i in indices))


def sequence_rng(seed):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0,)))


def trend_rng(seed, ordinal):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1, int(ordinal))))


def hypothesize_trend_sequence(lib, target_days, rng, first_sign="random"):
    """Draw alternating trends uniformly among same-sign library trends until
    the cumulative length reaches ``target_days``."""
    if first_sign not in FIRST_SIGNS:
        raise ValueError(f"first_sign must be one of {FIRST_SIGNS}")
    pools = {UP: lib.indices_by_sign(UP), DOWN: lib.indices_by_sign(DOWN)}
    if not pools[UP] or not pools[DOWN]:
        raise LibraryError("library needs trends of both signs")
    sign = first_sign
    if sign == "random":
        sign = UP if rng.random() < 0.5 else DOWN
    indices, signs, total = [], [], 0
    while total < target_days:
        pool = pools[sign]
        idx = pool[int(rng.integers(len(pool)))]
        indices.append(idx)
        signs.append(sign)
        total += lib.trends[idx].n_days
        sign = DOWN if sign == UP else UP
    return TrendSequence(tuple(indices), tuple(signs))


def sample_window(p, rng):
    """Draw ``p.window_len`` return vectors ``mu + A z``; result is (window_len, S)."""
    z = rng.standard_normal((p.factor.shape[1], p.window_len))
    return (p.mu[:, None] + p.factor @ z).T


def sample_trend(trend, rng):
    """All windows of one trend, in order, as an (S, n_days) block."""
    return np.concatenate([sample_window(w, rng).T for w in trend.windows], axis=1)


def synthesize_scenario(spec, sequence=None, n_jobs=1):
    """Generate an ``S x target_days`` return panel from ``spec.library``.

    ``sequence`` overrides the random trend sequence (hand-crafted scenarios);
    it must cover at least ``target_days`` days.
    """
    lib = spec.library
    if sequence is None:
        sequence = hypothesize_trend_sequence(lib, spec.target_days, sequence_rng(spec.seed),
                                              spec.first_sign)
    elif sequence.n_days(lib) < spec.target_days:
        raise LibraryError(
            f"trend sequence covers {sequence.n_days(lib)} days, fewer than {spec.target_days}")

    # Only trends that reach into the first target_days are sampled.
    needed, total = [], 0
    for k, idx in enumerate(sequence.indices):
        if total >= spec.target_days:
            break
        needed.append((k, idx))
        total += lib.trends[idx].n_days

    def run(item):
        k, idx = item
        return sample_trend(lib.trends[idx], trend_rng(spec.seed, k))

    if n_jobs is not None and n_jobs > 1 and len(needed) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(run, needed))
    else:
        blocks = [run(item) for item in needed]
    returns = np.concatenate(blocks, axis=1)[:, :spec.target_days]
    return ReturnPanel(list(lib.assets), sim_day_labels(spec.target_days),
                       np.ascontiguousarray(returns))
