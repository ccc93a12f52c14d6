"""Exhaustive solver for tiny subset-selection instances.

Enumerates every size-``M`` subset of the pool and returns the exact minimum
distance to the target together with all minimizers. Used as ground truth
for the greedy deletion rule.
"""

from dataclasses import dataclass, field
from itertools import chain, combinations, islice
from math import comb

import numpy as np

from ._validation import check_random_state, pad
from .core import label_matrix
from .distributions import DistanceKind, KLDirection, counts_distance, distance_rows
from .exceptions import InstanceTooLargeError
from .strategies import TIE_ATOL, greedy_delete

MAX_SUBSETS = 2_000_000
_CHUNK = 50_000


@dataclass
class OracleResult:
    best_distance: float
    optimal_subsets: list
    subsets_evaluated: int


@dataclass
class GapStats:
    mean_gap: float
    max_gap: float
    match_rate: float
    best_distance: float
    gaps: list = field(default_factory=list)


def _pool_matrix(pool, target):
    if isinstance(pool, np.ndarray):
        labels = pool.astype(np.int64)
    else:
        labels = label_matrix(pool)
    n = max(labels.shape[1], len(target))
    if labels.shape[1] < n:
        labels = np.concatenate([labels, np.zeros((labels.shape[0], n - labels.shape[1]), dtype=np.int64)], axis=1)
    return labels, pad(np.asarray(target, dtype=np.float64), n)


def check_instance(n_pool, memory_size, max_subsets=MAX_SUBSETS):
    if not 1 <= memory_size <= n_pool:
        raise ValueError(f"memory size {memory_size} must be in [1, {n_pool}]")
    total = comb(n_pool, memory_size)
    if total > max_subsets:
        raise InstanceTooLargeError(
            f"C({n_pool}, {memory_size}) = {total:.3e} subsets exceeds the limit of {max_subsets}"
        )
    return total


def brute_force_select(pool, memory_size, target, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST, max_subsets=MAX_SUBSETS):
    """Exact minimizers of the memory distance over all size-``memory_size`` subsets.

    ``pool`` is a list of samples or a multi-hot label matrix. Subsets are
    index tuples into the pool, in lexicographic order.
    """
    labels, target = _pool_matrix(pool, target)
    total = check_instance(labels.shape[0], memory_size, max_subsets)
    combos = combinations(range(labels.shape[0]), memory_size)
    best = np.inf
    winners = []
    done = 0
    while done < total:
        take = min(_CHUNK, total - done)
        idx = np.fromiter(chain.from_iterable(islice(combos, take)), dtype=np.intp, count=take * memory_size)
        idx = idx.reshape(take, memory_size)
        dist = distance_rows(labels[idx].sum(axis=1), target, kind, direction)
        chunk_best = dist.min()
        if chunk_best < best - TIE_ATOL:
            winners = []
        best = min(best, chunk_best)
        hits = np.flatnonzero(dist <= best + TIE_ATOL)
        winners.extend((float(dist[h]), tuple(int(i) for i in idx[h])) for h in hits)
        done += take
    optimal = [subset for d, subset in winners if d <= best + TIE_ATOL]
    return OracleResult(float(best), optimal, int(total))


def greedy_select(pool, memory_size, target, kind=DistanceKind.KL, rng=None, direction=KLDirection.MEMORY_FIRST):
    """Indices kept by greedy deletion from ``pool`` down to ``memory_size``."""
    labels, target = _pool_matrix(pool, target)
    n_delete = labels.shape[0] - memory_size
    if n_delete == 0:
        return list(range(labels.shape[0]))
    deleted, _ = greedy_delete(labels, n_delete, target, kind, rng, direction)
    gone = set(deleted)
    return [i for i in range(labels.shape[0]) if i not in gone]


def greedy_gap(pool, memory_size, target, kind=DistanceKind.KL, trials=10, random_state=None, direction=KLDirection.MEMORY_FIRST):
    """Compare greedy deletion against the exact optimum over several seeds."""
    labels, target = _pool_matrix(pool, target)
    oracle = brute_force_select(labels, memory_size, target, kind, direction)
    rng = check_random_state(random_state)
    gaps = []
    for _ in range(trials):
        kept = greedy_select(labels, memory_size, target, kind, rng, direction)
        greedy = counts_distance(labels[kept].sum(axis=0), target, kind, direction)
        gaps.append(greedy - oracle.best_distance)
    gaps_arr = np.asarray(gaps)
    return GapStats(
        mean_gap=float(gaps_arr.mean()),
        max_gap=float(gaps_arr.max()),
        match_rate=float(np.mean(gaps_arr <= TIE_ATOL)),
        best_distance=oracle.best_distance,
        gaps=gaps,
    )
