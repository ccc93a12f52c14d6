"""Empirical and target class distributions and distances between them."""

from enum import Enum

import numpy as np

from ._validation import check_rho, pad
from .exceptions import EmptyCountsError, NoClassesSeenError

#: Additive per-class smoothing applied before every KL evaluation.
KL_EPS = 1e-12


class DistanceKind(str, Enum):
    KL = "kl"
    TV = "tv"


class KLDirection(str, Enum):
    """Which argument of KL is the memory distribution."""

    MEMORY_FIRST = "memory_first"  # KL(memory || target)
    TARGET_FIRST = "target_first"  # KL(target || memory)


def empirical_distribution(counts):
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyCountsError("cannot normalize all-zero class counts")
    return counts / total


def target_distribution(freq, rho=0.0):
    """Allocation target ``freq**rho`` normalized over the seen classes.

    Classes with zero frequency get zero mass for every ``rho``, including
    ``rho == 0`` where ``0**0`` would otherwise count as one.

    Parameters
    ----------
    freq : FrequencyTracker or array-like of int
        Running per-class stream frequencies.
    rho : float in [0, 1]
        Power of allocation. 0 is uniform over seen classes, 1 is proportional
        to stream frequency.
    """
    rho = check_rho(rho)
    freq = np.asarray(getattr(freq, "freq", freq), dtype=np.float64)
    seen = freq > 0
    if not seen.any():
        raise NoClassesSeenError("no class has been observed yet")
    weights = np.zeros_like(freq)
    weights[seen] = freq[seen] ** rho
    return weights / weights.sum()


def smooth(p, eps=KL_EPS):
    p = np.asarray(p, dtype=np.float64)
    return (p + eps) / (1.0 + p.shape[-1] * eps)


def distance(p, q, kind=DistanceKind.KL):
    """Distance from ``p`` to ``q``.

    KL is ``sum p*ln(p/q)`` in nats on smoothed inputs, so zero-mass classes
    give a large finite value. TV is half the L1 distance on the raw inputs.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    kind = DistanceKind(kind)
    if kind is DistanceKind.TV:
        return 0.5 * float(np.abs(p - q).sum())
    ps, qs = smooth(p), smooth(q)
    # KL is nonnegative; clip the last-bit rounding of nearly equal inputs
    return max(0.0, float(np.sum(ps * np.log(ps / qs))))


def memory_distance(memory_probs, target, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST):
    """Distance between a memory distribution and the target.

    The shorter vector is zero-extended so both cover the same class universe.
    """
    n = max(len(memory_probs), len(target))
    mem, tgt = pad(np.asarray(memory_probs, dtype=np.float64), n), pad(np.asarray(target, dtype=np.float64), n)
    if DistanceKind(kind) is DistanceKind.KL and KLDirection(direction) is KLDirection.TARGET_FIRST:
        return distance(tgt, mem, kind)
    return distance(mem, tgt, kind)


def counts_distance(counts, target, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST):
    """``memory_distance`` of the empirical distribution of ``counts``."""
    return memory_distance(empirical_distribution(counts), target, kind, direction)


def distance_rows(counts_rows, target, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST):
    """Memory distance of every row of a ``(n, C)`` count matrix at once."""
    counts_rows = np.asarray(counts_rows, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    probs = counts_rows / counts_rows.sum(axis=1, keepdims=True)
    if DistanceKind(kind) is DistanceKind.TV:
        return 0.5 * np.abs(probs - target).sum(axis=1)
    q, p = smooth(probs), smooth(target)
    if KLDirection(direction) is KLDirection.TARGET_FIRST:
        return np.maximum((p * np.log(p / q)).sum(axis=1), 0.0)
    return np.maximum((q * np.log(q / p)).sum(axis=1), 0.0)
