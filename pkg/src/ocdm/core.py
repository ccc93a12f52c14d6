"""Samples, the bounded memory buffer and per-class counting.

Class ids are dense integers. The class universe grows lazily: every vector
indexed by class is zero-extended the first time a larger id shows up, so
streams can introduce classes task by task without a schema.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_label_set, check_positive_int
from .exceptions import CapacityExceededError


@dataclass(frozen=True)
class Sample:
    """One stream element. ``labels`` is normalized to a sorted tuple."""

    sample_id: int
    labels: tuple
    payload: bytes = field(default=b"", compare=False, repr=False)

    def __post_init__(self):
        if isinstance(self.sample_id, bool) or int(self.sample_id) != self.sample_id or self.sample_id < 0:
            raise ValueError(f"sample_id must be a nonnegative integer, got {self.sample_id!r}")
        object.__setattr__(self, "sample_id", int(self.sample_id))
        object.__setattr__(self, "labels", check_label_set(self.labels))
        if not isinstance(self.payload, (bytes, bytearray)):
            raise TypeError("payload must be bytes")

    @property
    def is_multi_label(self):
        return len(self.labels) > 1


def n_classes_of(samples):
    """Size of the dense class universe needed to index ``samples``."""
    return max((s.labels[-1] for s in samples), default=-1) + 1


def rebuild_counts(samples, n_classes=None):
    """Tally, for each class, the number of samples carrying it.

    A multi-label sample increments every one of its classes.
    """
    samples = list(samples)
    n = max(n_classes_of(samples), n_classes or 0)
    counts = np.zeros(n, dtype=np.int64)
    for s in samples:
        counts[list(s.labels)] += 1
    return counts


def label_matrix(samples, n_classes=None):
    """Multi-hot ``(len(samples), C)`` int64 matrix of the samples' labels."""
    samples = list(samples)
    n = max(n_classes_of(samples), n_classes or 0)
    out = np.zeros((len(samples), n), dtype=np.int64)
    for i, s in enumerate(samples):
        out[i, list(s.labels)] = 1
    return out


class MemoryBuffer:
    """Fixed-capacity sample store with incrementally maintained class counts.

    Removal is swap-remove: the last sample fills the hole, so positions are
    not stable across removals. A multi-hot label matrix mirrors ``samples``
    row for row so strategies can scan the buffer without touching Python
    objects.

    Parameters
    ----------
    capacity : int
        Maximum number of stored samples.
    """

    def __init__(self, capacity):
        self.capacity = check_positive_int(capacity, "capacity")
        self.samples = []
        self._counts = np.zeros(0, dtype=np.int64)
        self._matrix = np.zeros((self.capacity, 0), dtype=np.int64)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __repr__(self):
        return f"MemoryBuffer(capacity={self.capacity}, size={self.size})"

    @property
    def size(self):
        return len(self.samples)

    @property
    def is_full(self):
        return len(self.samples) >= self.capacity

    @property
    def n_classes(self):
        return self._counts.shape[0]

    @property
    def counts(self):
        """Per-class counts of the stored samples (read-only view)."""
        view = self._counts.view()
        view.flags.writeable = False
        return view

    def label_matrix(self):
        """Multi-hot labels of the stored samples, one row per position."""
        return self._matrix[: self.size].copy()

    def ensure_classes(self, n_classes):
        """Zero-extend the class universe to at least ``n_classes``."""
        extra = n_classes - self._counts.shape[0]
        if extra > 0:
            self._counts = np.concatenate([self._counts, np.zeros(extra, dtype=np.int64)])
            self._matrix = np.concatenate(
                [self._matrix, np.zeros((self.capacity, extra), dtype=np.int64)], axis=1
            )

    def insert(self, sample):
        if self.is_full:
            raise CapacityExceededError(
                f"buffer is full ({self.capacity} samples); route the sample through a strategy"
            )
        self.ensure_classes(sample.labels[-1] + 1)
        labels = list(sample.labels)
        row = self.size
        self._matrix[row] = 0
        self._matrix[row, labels] = 1
        self._counts[labels] += 1
        self.samples.append(sample)

    def remove(self, idx):
        """Remove and return the sample at ``idx`` (swap-remove)."""
        size = self.size
        if not isinstance(idx, (int, np.integer)) or not 0 <= idx < size:
            raise IndexError(f"index {idx} out of range for buffer of size {size}")
        removed = self.samples[idx]
        self._counts[list(removed.labels)] -= 1
        last = size - 1
        if idx != last:
            self.samples[idx] = self.samples[last]
            self._matrix[idx] = self._matrix[last]
        self.samples.pop()
        return removed

    def replace(self, idx, sample):
        """Overwrite the sample at ``idx`` in place and return the old one."""
        size = self.size
        if not isinstance(idx, (int, np.integer)) or not 0 <= idx < size:
            raise IndexError(f"index {idx} out of range for buffer of size {size}")
        self.ensure_classes(sample.labels[-1] + 1)
        old = self.samples[idx]
        self._counts[list(old.labels)] -= 1
        labels = list(sample.labels)
        self._counts[labels] += 1
        self._matrix[idx] = 0
        self._matrix[idx, labels] = 1
        self.samples[idx] = sample
        return old

    def members(self, class_id):
        """Positions of the stored samples labeled with ``class_id``."""
        if class_id >= self.n_classes:
            return np.zeros(0, dtype=np.intp)
        return np.flatnonzero(self._matrix[: self.size, class_id])

    def clear(self):
        self.samples = []
        self._counts[:] = 0

    def check_counts(self):
        """True when the maintained counts agree with a full recount."""
        fresh = rebuild_counts(self.samples, self.n_classes)
        return np.array_equal(fresh, self._counts) and np.array_equal(
            self._matrix[: self.size], label_matrix(self.samples, self.n_classes)
        )


class FrequencyTracker:
    """Running count of stream samples per class. Never decremented."""

    def __init__(self):
        self.freq = np.zeros(0, dtype=np.int64)
        self.n_samples = 0

    def __repr__(self):
        return f"FrequencyTracker(n_classes={self.n_classes}, n_samples={self.n_samples})"

    @property
    def n_classes(self):
        return self.freq.shape[0]

    def update(self, samples):
        samples = list(samples)
        n = n_classes_of(samples)
        if n > self.freq.shape[0]:
            self.freq = np.concatenate([self.freq, np.zeros(n - self.freq.shape[0], dtype=np.int64)])
        for s in samples:
            self.freq[list(s.labels)] += 1
        self.n_samples += len(samples)
        return self

    def copy(self):
        out = FrequencyTracker()
        out.freq = self.freq.copy()
        out.n_samples = self.n_samples
        return out
