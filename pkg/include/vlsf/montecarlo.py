"""
Chunked, seeded Monte Carlo execution.

Trials are split into fixed-size chunks. Chunk k draws from a Philox stream keyed by
(seed, k, *stream_key), so results do not depend on how chunks are spread over workers.
Merging is always done in chunk order.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 10_000
# normal quantile of the reported confidence intervals
DEFAULT_Z = 1.96

T = TypeVar("T")
R = TypeVar("R")


def validate_seed(seed: int) -> None:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0 or seed >= 2 ** 64:
        logger.error(f"Invalid seed: {seed!r}")
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")


def substream(seed: int, *key: int) -> np.random.Generator:
    """
    Counter-based generator for the substream identified by (seed, *key).
    """
    validate_seed(seed)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def plan_chunks(trials: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[Tuple[int, int]]:
    """
    Split trials into (chunk_index, chunk_trials) pairs; only the last chunk may be short.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    full, rest = divmod(trials, chunk_size)
    plan = [(k, chunk_size) for k in range(full)]
    if rest:
        plan.append((full, rest))
    return plan


def run_chunks(func: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """
    Apply func to every task and return the results in task order.

    With workers > 1 the tasks run in a process pool; func and the tasks must be picklable.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]

    logger.info(f"Dispatching {len(tasks)} chunks to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))
