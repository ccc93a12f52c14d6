"""Memory-update strategies.

Each strategy exists twice: as a function acting on a :class:`MemoryBuffer`
(``ocdm_update``, ``reservoir_update``, ...) and as an sklearn-style
estimator that owns the buffer, the frequency tracker and the random source
and consumes a stream through ``partial_fit``.

While the buffer has free space every strategy stores arrivals directly.
Once it is full, the greedy strategy pools memory and batch and deletes
``b`` samples one at a time, each time removing the candidate whose removal
leaves the pool's class distribution closest to the target.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_batch, check_positive_int, check_random_state, check_rho, pad
from .core import FrequencyTracker, MemoryBuffer, label_matrix, n_classes_of
from .distributions import (
    KL_EPS,
    DistanceKind,
    KLDirection,
    counts_distance,
    smooth,
    target_distribution,
)

#: Two candidate distances closer than this are treated as a tie.
TIE_ATOL = 1e-12


@dataclass
class UpdateReport:
    deleted_sample_ids: list = field(default_factory=list)
    distance_before: float = float("nan")
    distance_after: float = float("nan")
    scan_count: int = 0


class _CandidateScorer:
    """Distances left by deleting each candidate of a shrinking pool.

    The distance is a sum of per-class terms. Deleting a candidate changes
    the counts only on its own labels, and changes the label total by its
    cardinality. So for each distinct cardinality the per-class terms are
    computed once for the current counts and for counts minus one, and every
    candidate's distance is the full sum corrected on its own labels. The
    pool is never re-tallied.

    Everything that does not depend on the counts (smoothed target, its log,
    the cardinality of every row) is prepared once for the whole pool.
    """

    def __init__(self, target, cardinality, kind, direction):
        self.kind = DistanceKind(kind)
        self.direction = KLDirection(direction)
        self.target = np.asarray(target, dtype=np.float64)
        n_classes = self.target.shape[0]
        self.norm = 1.0 + n_classes * KL_EPS
        self.p = smooth(self.target)
        self.log_p = np.log(self.p)
        cardinality = np.asarray(cardinality, dtype=np.intp)
        self.cards, self.which = np.unique(cardinality, return_inverse=True)
        self.which = self.which.reshape(-1)

    def _terms(self, counts, totals):
        frac = counts[:, None, :] / totals[None, :, None]
        if self.kind is DistanceKind.TV:
            return 0.5 * np.abs(frac - self.target)
        q = (frac + KL_EPS) / self.norm
        if self.direction is KLDirection.MEMORY_FIRST:
            return q * (np.log(q) - self.log_p)
        return self.p * (self.log_p - np.log(q))

    def __call__(self, counts, labels, which):
        totals = counts.sum() - self.cards
        # a cardinality whose rows were all deleted can leave a total of zero
        # or less; its column is never read
        with np.errstate(divide="ignore", invalid="ignore"):
            both = self._terms(np.stack([counts, np.maximum(counts - 1.0, 0.0)]), totals)
        base = both[0]
        delta = base - both[1]
        if self.cards.shape[0] == 1:
            return base.sum() - labels @ delta[0]
        corrections = labels @ delta.T
        return base.sum(axis=1)[which] - np.take_along_axis(corrections, which[:, None], axis=1)[:, 0]


def candidate_distances(counts, labels, target, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST, cardinality=None):
    """Distance to ``target`` left by deleting each candidate from the pool.

    Parameters
    ----------
    counts : ndarray of shape (C,)
        Class counts of the whole pool.
    labels : ndarray of shape (n, C)
        Multi-hot labels of the candidates.
    target : ndarray of shape (C,)
    """
    labels = np.asarray(labels, dtype=np.float64)
    if cardinality is None:
        cardinality = labels.sum(axis=1)
    scorer = _CandidateScorer(target, cardinality, kind, direction)
    return scorer(np.asarray(counts, dtype=np.float64), labels, scorer.which)


def _pick_min(dist, rng):
    best = dist.min()
    ties = np.flatnonzero(dist <= best + TIE_ATOL)
    if ties.shape[0] == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.shape[0])])


def _as_label_matrix(candidates, n_classes):
    if isinstance(candidates, np.ndarray):
        return pad_columns(candidates.astype(np.int64), n_classes)
    rows = [tuple(c.labels) if hasattr(c, "labels") else tuple(c) for c in candidates]
    out = np.zeros((len(rows), n_classes), dtype=np.int64)
    for i, row in enumerate(rows):
        out[i, list(row)] = 1
    return out


def pad_columns(matrix, n_classes):
    extra = n_classes - matrix.shape[1]
    if extra <= 0:
        return matrix
    return np.concatenate([matrix, np.zeros((matrix.shape[0], extra), dtype=matrix.dtype)], axis=1)


def ocdm_delete_argmin(counts, candidates, target, kind=DistanceKind.KL, rng=None, direction=KLDirection.MEMORY_FIRST):
    """Index of the candidate whose deletion best matches the target.

    ``candidates`` is a multi-hot matrix or a sequence of label sets (or
    samples). Exact ties, up to ``TIE_ATOL``, are broken uniformly at random.
    """
    rng = check_random_state(rng)
    n = max(len(counts), len(target))
    if isinstance(candidates, np.ndarray):
        n = max(n, candidates.shape[1])
    else:
        candidates = list(candidates)
        n = max([n] + [max(getattr(c, "labels", c)) + 1 for c in candidates])
    labels = _as_label_matrix(candidates, n)
    if labels.shape[0] == 0:
        raise ValueError("no candidates to delete from")
    if labels.shape[0] == 1:
        return 0
    dist = candidate_distances(pad(np.asarray(counts), n), labels, pad(np.asarray(target, dtype=np.float64), n), kind, direction)
    return _pick_min(dist, rng)


def greedy_delete(labels, n_delete, target, kind=DistanceKind.KL, rng=None, direction=KLDirection.MEMORY_FIRST, counts=None):
    """Delete ``n_delete`` pool rows greedily.

    Returns the deleted row indices in deletion order and the number of
    candidate evaluations performed.
    """
    rng = check_random_state(rng)
    kind, direction = DistanceKind(kind), KLDirection(direction)
    work = np.array(labels, dtype=np.float64, copy=True)
    target = np.asarray(target, dtype=np.float64)
    counts = work.sum(axis=0) if counts is None else np.array(counts, dtype=np.float64)
    scorer = _CandidateScorer(target, work.sum(axis=1), kind, direction)
    which = scorer.which.copy()
    pos = np.arange(work.shape[0])
    alive = work.shape[0]
    if n_delete >= alive:
        raise ValueError(f"cannot delete {n_delete} of {alive} pool samples")
    deleted = []
    scans = 0
    for _ in range(n_delete):
        dist = scorer(counts, work[:alive], which[:alive])
        scans += alive
        j = _pick_min(dist, rng)
        deleted.append(int(pos[j]))
        counts -= work[j]
        alive -= 1
        work[j], which[j], pos[j] = work[alive], which[alive], pos[alive]
    return deleted, scans


def _distance_or_nan(buf, target, kind, direction):
    if target is None or buf.size == 0:
        return float("nan")
    return counts_distance(buf.counts, target, kind, direction)


def _warm_up(buf, batch, rng):
    """Store as much of ``batch`` as fits, chosen at random; return the rest."""
    room = buf.capacity - buf.size
    if room <= 0 or not batch:
        return list(batch)
    if len(batch) <= room:
        for s in batch:
            buf.insert(s)
        return []
    chosen = np.zeros(len(batch), dtype=bool)
    chosen[rng.choice(len(batch), size=room, replace=False)] = True
    for s, keep in zip(batch, chosen):
        if keep:
            buf.insert(s)
    return [s for s, keep in zip(batch, chosen) if not keep]


def ocdm_update(buf, batch, freq, rho=0.0, kind=DistanceKind.KL, rng=None, direction=KLDirection.MEMORY_FIRST):
    """Greedy class-distribution update of ``buf`` with ``batch``.

    ``freq`` must already include the batch's labels.
    """
    rng = check_random_state(rng)
    batch = check_batch(batch)
    target = target_distribution(freq, rho) if np.any(np.asarray(getattr(freq, "freq", freq)) > 0) else None
    report = UpdateReport(distance_before=_distance_or_nan(buf, target, kind, direction))
    leftovers = _warm_up(buf, batch, rng)
    if leftovers:
        n = max(buf.n_classes, n_classes_of(leftovers), len(target))
        buf.ensure_classes(n)
        size = buf.size
        pool_labels = np.concatenate([buf.label_matrix(), label_matrix(leftovers, n)])
        deleted, report.scan_count = greedy_delete(
            pool_labels, len(leftovers), pad(target, n), kind, rng, direction
        )
        gone = set(deleted)
        report.deleted_sample_ids = [
            buf.samples[i].sample_id if i < size else leftovers[i - size].sample_id for i in deleted
        ]
        for i in sorted((i for i in deleted if i < size), reverse=True):
            buf.remove(i)
        for k, s in enumerate(leftovers):
            if size + k not in gone:
                buf.insert(s)
    report.distance_after = _distance_or_nan(buf, target, kind, direction)
    return report


def onlyone_update(buf, batch, freq, rho=0.0, kind=DistanceKind.KL, rng=None, direction=KLDirection.MEMORY_FIRST):
    """``ocdm_update`` restricted to the single-label samples of ``batch``."""
    batch = [s for s in check_batch(batch) if len(s.labels) == 1]
    return ocdm_update(buf, batch, freq, rho, kind, rng, direction)


def reservoir_update(buf, batch, stream_count, rng=None, target=None, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST):
    """Classic reservoir sampling, one decision per stream position.

    ``stream_count`` is the number of samples seen before this batch.
    """
    rng = check_random_state(rng)
    report = UpdateReport(distance_before=_distance_or_nan(buf, target, kind, direction))
    n = stream_count
    for s in check_batch(batch):
        n += 1
        if not buf.is_full:
            buf.insert(s)
            continue
        j = int(rng.integers(n))
        if j < buf.capacity:
            report.deleted_sample_ids.append(buf.replace(j, s).sample_id)
        else:
            report.deleted_sample_ids.append(s.sample_id)
    report.distance_after = _distance_or_nan(buf, target, kind, direction)
    return report


def random_update(buf, batch, rng=None, target=None, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST):
    """Pool memory and batch, then delete uniformly random pool members."""
    rng = check_random_state(rng)
    report = UpdateReport(distance_before=_distance_or_nan(buf, target, kind, direction))
    left = _warm_up(buf, check_batch(batch), rng)
    for _ in range(len(left)):
        idx = int(rng.integers(buf.size + len(left)))
        if idx < buf.size:
            report.deleted_sample_ids.append(buf.remove(idx).sample_id)
        else:
            report.deleted_sample_ids.append(left.pop(idx - buf.size).sample_id)
    for s in left:
        buf.insert(s)
    report.distance_after = _distance_or_nan(buf, target, kind, direction)
    return report


def max_update(buf, batch, rng=None, target=None, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST):
    """Repeatedly delete a random pool sample of the currently largest class."""
    rng = check_random_state(rng)
    report = UpdateReport(distance_before=_distance_or_nan(buf, target, kind, direction))
    left = _warm_up(buf, check_batch(batch), rng)
    if left:
        n = max(buf.n_classes, n_classes_of(left))
        buf.ensure_classes(n)
        left_labels = label_matrix(left, n)
        for _ in range(len(left)):
            pooled = buf.counts + left_labels.sum(axis=0)
            top = np.flatnonzero(pooled == pooled.max())
            cls = int(top[rng.integers(top.shape[0])]) if top.shape[0] > 1 else int(top[0])
            in_buf = buf.members(cls)
            in_left = np.flatnonzero(left_labels[:, cls])
            report.scan_count += buf.size + len(left)
            k = int(rng.integers(in_buf.shape[0] + in_left.shape[0]))
            if k < in_buf.shape[0]:
                report.deleted_sample_ids.append(buf.remove(int(in_buf[k])).sample_id)
            else:
                i = int(in_left[k - in_buf.shape[0]])
                report.deleted_sample_ids.append(left.pop(i).sample_id)
                left_labels = np.delete(left_labels, i, axis=0)
        for s in left:
            buf.insert(s)
    report.distance_after = _distance_or_nan(buf, target, kind, direction)
    return report


class BaseUpdateStrategy(BaseEstimator):
    """Shared ``fit``/``partial_fit`` plumbing for the update strategies.

    Fitted attributes
    -----------------
    buffer_ : MemoryBuffer
    freq_ : FrequencyTracker
        Label frequencies of everything seen, including discarded samples.
    n_seen_ : int
    n_steps_ : int
    last_report_ : UpdateReport
    """

    def _reset(self):
        check_positive_int(self.capacity, "capacity")
        self.buffer_ = MemoryBuffer(self.capacity)
        self.freq_ = FrequencyTracker()
        self.n_seen_ = 0
        self.n_steps_ = 0
        self.last_report_ = None
        self._rng = check_random_state(self.random_state)

    def partial_fit(self, batch):
        if not hasattr(self, "buffer_"):
            self._reset()
        batch = check_batch(batch)
        self.freq_.update(batch)
        self.last_report_ = self._update(batch)
        self.n_seen_ += len(batch)
        self.n_steps_ += 1
        return self

    def fit(self, stream):
        """Reset and consume an iterable of batches."""
        self._reset()
        for batch in stream:
            self.partial_fit(batch)
        return self

    def _report_target(self):
        return target_distribution(self.freq_, 0.0) if self.freq_.n_samples else None

    @property
    def class_counts_(self):
        return pad(self.buffer_.counts.copy(), self.freq_.n_classes)

    def get_memory(self):
        return list(self.buffer_.samples)


class OCDM(BaseUpdateStrategy):
    """Greedy class-distribution-optimizing replay memory.

    Parameters
    ----------
    capacity : int, default=1000
    rho : float in [0, 1], default=0.0
        Power of allocation of the target distribution.
    distance : {"kl", "tv"}, default="kl"
    kl_direction : {"memory_first", "target_first"}, default="memory_first"
    random_state : int, Generator or None
    """

    def __init__(self, capacity=1000, rho=0.0, distance="kl", kl_direction="memory_first", random_state=None):
        self.capacity = capacity
        self.rho = rho
        self.distance = distance
        self.kl_direction = kl_direction
        self.random_state = random_state

    def _reset(self):
        check_rho(self.rho)
        DistanceKind(self.distance)
        KLDirection(self.kl_direction)
        super()._reset()

    def _update(self, batch):
        return ocdm_update(
            self.buffer_, batch, self.freq_, self.rho, DistanceKind(self.distance), self._rng, KLDirection(self.kl_direction)
        )

    def current_target(self):
        return target_distribution(self.freq_, self.rho)


class OnlyOne(OCDM):
    """OCDM that ignores every multi-label sample of the stream."""

    def _update(self, batch):
        return onlyone_update(
            self.buffer_, batch, self.freq_, self.rho, DistanceKind(self.distance), self._rng, KLDirection(self.kl_direction)
        )


class ReservoirSampling(BaseUpdateStrategy):
    def __init__(self, capacity=1000, random_state=None):
        self.capacity = capacity
        self.random_state = random_state

    def _update(self, batch):
        return reservoir_update(self.buffer_, batch, self.n_seen_, self._rng, self._report_target())


class RandomDeletion(BaseUpdateStrategy):
    """Deletes uniformly random members of memory plus batch."""

    def __init__(self, capacity=1000, random_state=None):
        self.capacity = capacity
        self.random_state = random_state

    def _update(self, batch):
        return random_update(self.buffer_, batch, self._rng, self._report_target())


class MaxDeletion(BaseUpdateStrategy):
    """Deletes random samples of the largest pooled class."""

    def __init__(self, capacity=1000, random_state=None):
        self.capacity = capacity
        self.random_state = random_state

    def _update(self, batch):
        return max_update(self.buffer_, batch, self._rng, self._report_target())


STRATEGIES = {
    "ocdm": OCDM,
    "onlyone": OnlyOne,
    "reservoir": ReservoirSampling,
    "random": RandomDeletion,
    "max": MaxDeletion,
}


def make_strategy(name, capacity=1000, rho=0.0, distance="kl", kl_direction="memory_first", random_state=None):
    """Build a strategy estimator by name; rho and distance apply to greedy ones."""
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None
    if issubclass(cls, OCDM):
        return cls(capacity, rho, distance, kl_direction, random_state)
    return cls(capacity, random_state)
