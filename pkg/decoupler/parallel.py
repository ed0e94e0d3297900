"""Block-structured Monte Carlo execution with reproducible RNG substreams.

Trajectories are split into fixed-size blocks. Each block owns a generator
seeded from ``SeedSequence([seed, *stream_key, block_index])`` so a block's
draws never depend on which thread ran it or on how many threads there are.
Block statistics are merged strictly in block order.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

BlockFn = Callable[[np.random.Generator, int], np.ndarray]


def block_sizes(n_traj: int, block_size: int) -> list[int]:
    if n_traj < 1:
        raise ValueError('n_traj must be >= 1')
    if block_size < 1:
        raise ValueError('block_size must be >= 1')
    full, rest = divmod(n_traj, block_size)
    return [block_size] * full + ([rest] if rest else [])


def block_generator(seed: int, stream_key: Sequence[int], block_index: int) -> np.random.Generator:
    entropy = [int(seed), *(int(k) for k in stream_key), int(block_index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class RunningStats:
    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> 'RunningStats':
        samples = np.asarray(samples, dtype=float)
        mean = samples.mean(axis=0)
        m2 = ((samples - mean) ** 2).sum(axis=0)
        return cls(count=samples.shape[0], mean=mean, m2=m2)

    def merge(self, other: 'RunningStats') -> 'RunningStats':
        # pairwise update; order of merging is part of the determinism contract
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / n)
        return RunningStats(count=n, mean=mean, m2=m2)

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.full_like(self.mean, np.inf)
        return self.m2 / (self.count - 1)

    @property
    def std_error(self) -> np.ndarray:
        return np.sqrt(self.variance / self.count)


def run_blocks(
    fn: BlockFn,
    n_traj: int,
    seed: int,
    stream_key: Sequence[int] = (),
    block_size: int = 4096,
    threads: int = 1,
) -> RunningStats:
    """Evaluate ``fn(rng, size)`` on every block and reduce in block order.

    ``fn`` returns per-trajectory samples with the trajectory on axis 0.
    """
    sizes = block_sizes(n_traj, block_size)
    logger.debug('ensemble of %d trajectories in %d blocks on %d thread(s)', n_traj, len(sizes), threads)

    def one_block(index: int) -> RunningStats:
        rng = block_generator(seed, stream_key, index)
        return RunningStats.from_samples(fn(rng, sizes[index]))

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_block, range(len(sizes))))
    else:
        results = [one_block(i) for i in range(len(sizes))]

    total = results[0]
    for stats in results[1:]:
        total = total.merge(stats)
    return total
