"""Synthetic multi-task multi-label streams, stream files and dataset statistics.

Generative model: within a task every sample has a primary class, with the
task's ``n_samples`` apportioned to classes in proportion to the class sizes
and shuffled. Each sample then adds every other class of the same task
independently with probability ``colabel[primary, other]`` scaled by the
other class's size relative to the task's largest class.
"""

import os
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from numbers import Real

import numpy as np

from ._validation import check_positive_int
from .core import Sample
from .exceptions import ClassAbsentError, EmptyDatasetError, StreamParseError, UnknownFieldError


@dataclass(frozen=True)
class TaskSpec:
    """Classes of one task and their imbalance and co-labeling profile.

    ``colabel_prob`` is a scalar, a per-primary-class sequence or a square
    matrix indexed ``[primary, other]`` in the order of ``classes``.
    ``n_samples`` defaults to ``sum(class_sizes)``.
    """

    classes: tuple
    class_sizes: tuple
    colabel_prob: object = 0.0
    n_samples: int = None

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
        object.__setattr__(self, "class_sizes", tuple(int(s) for s in self.class_sizes))
        if not self.classes:
            raise ValueError("a task needs at least one class")
        if len(set(self.classes)) != len(self.classes) or min(self.classes) < 0:
            raise ValueError(f"task classes must be distinct nonnegative ids, got {self.classes}")
        if len(self.class_sizes) != len(self.classes):
            raise ValueError("class_sizes must have one entry per class")
        if min(self.class_sizes) < 1:
            raise ValueError("class sizes must be positive")
        if self.n_samples is None:
            object.__setattr__(self, "n_samples", sum(self.class_sizes))
        check_positive_int(self.n_samples, "n_samples")
        self.colabel_matrix()

    def colabel_matrix(self):
        k = len(self.classes)
        raw = self.colabel_prob
        if isinstance(raw, Real):
            mat = np.full((k, k), float(raw))
        else:
            arr = np.asarray(raw, dtype=np.float64)
            if arr.shape == (k,):
                mat = np.repeat(arr[:, None], k, axis=1)
            elif arr.shape == (k, k):
                mat = arr.copy()
            else:
                raise ValueError(f"colabel_prob must be a scalar, length-{k} vector or {k}x{k} matrix")
        if np.any(mat < 0) or np.any(mat > 1):
            raise ValueError("colabel probabilities must lie in [0, 1]")
        np.fill_diagonal(mat, 0.0)
        return mat

    def inclusion_matrix(self):
        """Probability that a sample of primary class i also carries class j."""
        sizes = np.asarray(self.class_sizes, dtype=np.float64)
        return np.minimum(1.0, self.colabel_matrix() * (sizes / sizes.max())[None, :])


@dataclass(frozen=True)
class StreamSpec:
    tasks: tuple
    batch_size: int = 10
    seed: int = 0
    shuffle_within_task: bool = True

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ValueError("a stream needs at least one task")
        check_positive_int(self.batch_size, "batch_size")
        seen = set()
        for task in self.tasks:
            if not isinstance(task, TaskSpec):
                raise TypeError("tasks must be TaskSpec instances")
            overlap = seen.intersection(task.classes)
            if overlap:
                raise ValueError(f"classes {sorted(overlap)} are assigned to more than one task")
            seen.update(task.classes)

    @property
    def n_classes(self):
        return max(max(t.classes) for t in self.tasks) + 1

    def task_of_class(self):
        return {c: i for i, t in enumerate(self.tasks) for c in t.classes}

    def to_dict(self):
        return {
            "batch_size": self.batch_size,
            "seed": self.seed,
            "shuffle_within_task": self.shuffle_within_task,
            "tasks": [
                {
                    "classes": list(t.classes),
                    "class_sizes": list(t.class_sizes),
                    "colabel_prob": np.asarray(t.colabel_prob).tolist(),
                    "n_samples": t.n_samples,
                }
                for t in self.tasks
            ],
        }

    @classmethod
    def from_dict(cls, data):
        tasks = [TaskSpec(**t) for t in data["tasks"]]
        return cls(tasks, data.get("batch_size", 10), data.get("seed", 0), data.get("shuffle_within_task", True))


def _apportion(total, weights):
    """Split ``total`` into integers proportional to ``weights`` (largest remainder)."""
    share = total * weights / weights.sum()
    quota = np.floor(share).astype(np.int64)
    short = total - quota.sum()
    quota[np.argsort(-(share - quota), kind="stable")[:short]] += 1
    return quota


def _task_samples(task, rng, first_id, shuffle):
    k = len(task.classes)
    sizes = np.asarray(task.class_sizes, dtype=np.float64)
    primary = np.repeat(np.arange(k), _apportion(task.n_samples, sizes))
    rng.shuffle(primary)
    extra = rng.random((task.n_samples, k)) < task.inclusion_matrix()[primary]
    extra[np.arange(task.n_samples), primary] = True
    order = np.arange(task.n_samples) if shuffle else np.argsort(primary, kind="stable")
    classes = np.asarray(task.classes)
    return [Sample(first_id + i, classes[extra[row]].tolist()) for i, row in enumerate(order)]


def generate_samples(spec):
    """All samples of the stream, task by task, deterministic under ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    out = []
    for task in spec.tasks:
        out.extend(_task_samples(task, rng, len(out), spec.shuffle_within_task))
    return out


def generate_stream(spec):
    """Yield batches of ``spec.batch_size``; a batch never spans two tasks."""
    rng = np.random.default_rng(spec.seed)
    next_id = 0
    for task in spec.tasks:
        samples = _task_samples(task, rng, next_id, spec.shuffle_within_task)
        next_id += len(samples)
        for start in range(0, len(samples), spec.batch_size):
            yield samples[start : start + spec.batch_size]


def reorder_tasks(spec, permutation):
    """Same tasks in the order ``[spec.tasks[i] for i in permutation]``."""
    perm = [int(i) for i in permutation]
    if sorted(perm) != list(range(len(spec.tasks))):
        raise ValueError(f"{permutation!r} is not a permutation of {len(spec.tasks)} tasks")
    return replace(spec, tasks=tuple(spec.tasks[i] for i in perm))


def long_tailed_stream(
    n_tasks=4,
    classes_per_task=5,
    max_size=1500,
    min_size=40,
    colabel_prob=0.9,
    batch_size=10,
    seed=0,
):
    """Stream spec with geometrically decaying class sizes.

    Classes are ranked globally by size and dealt to tasks round robin so
    every task has a head and a tail.
    """
    n = n_tasks * classes_per_task
    ranks = np.arange(n)
    sizes = np.rint(max_size * (min_size / max_size) ** (ranks / max(n - 1, 1))).astype(int)
    tasks = []
    for t in range(n_tasks):
        ids = list(range(t * classes_per_task, (t + 1) * classes_per_task))
        rank_of = [t + n_tasks * j for j in range(classes_per_task)]
        tasks.append(TaskSpec(ids, [int(sizes[r]) for r in rank_of], colabel_prob))
    return StreamSpec(tasks, batch_size, seed)


def dominated_class_samples(minor_size=10, major_size=5000, seed=0):
    """Class 0 never occurs without class 1.

    Exactly ``minor_size`` of the ``major_size`` samples carry both labels,
    the rest carry class 1 only, in seeded random order.
    """
    if not 0 < minor_size <= major_size:
        raise ValueError("need 0 < minor_size <= major_size")
    dual = np.zeros(major_size, dtype=bool)
    dual[:minor_size] = True
    np.random.default_rng(seed).shuffle(dual)
    return [Sample(i, (0, 1) if d else (1,)) for i, d in enumerate(dual)]


def batched(samples, batch_size):
    samples = list(samples)
    return [samples[i : i + batch_size] for i in range(0, len(samples), batch_size)]


def _class_stats(dataset):
    totals, multi = Counter(), Counter()
    for s in dataset:
        totals.update(s.labels)
        if len(s.labels) > 1:
            multi.update(s.labels)
    return totals, multi


def mlr(dataset, class_id):
    """Fraction of the samples labeled ``class_id`` that carry more than one label."""
    totals, multi = _class_stats(dataset)
    if totals[class_id] == 0:
        raise ClassAbsentError(f"class {class_id} does not occur in the dataset")
    return multi[class_id] / totals[class_id]


def amlr(dataset):
    """Unweighted mean of ``mlr`` over the classes present."""
    totals, multi = _class_stats(dataset)
    if not totals:
        raise EmptyDatasetError("AMLR of an empty dataset is undefined")
    return float(np.mean([multi[c] / totals[c] for c in sorted(totals)]))


class Tier(str, Enum):
    MAJORITY = "majority"
    MODERATE = "moderate"
    MINORITY = "minority"


@dataclass(frozen=True)
class TierThresholds:
    """Counts above ``majority_min`` are majority, below ``minority_max`` minority.

    Counts in ``[minority_max, majority_min]`` are moderate.
    """

    majority_min: int = 600
    minority_max: int = 100

    def __post_init__(self):
        if not self.minority_max < self.majority_min:
            raise ValueError("minority_max must be smaller than majority_min")


def tier_classes(freq, thresholds=TierThresholds()):
    """Assign every seen class to majority, moderate or minority."""
    freq = np.asarray(getattr(freq, "freq", freq))
    tiers = {}
    for c in np.flatnonzero(freq > 0):
        n = freq[c]
        if n > thresholds.majority_min:
            tiers[int(c)] = Tier.MAJORITY
        elif n < thresholds.minority_max:
            tiers[int(c)] = Tier.MINORITY
        else:
            tiers[int(c)] = Tier.MODERATE
    return tiers


def _parse_line(lineno, line):
    if "\r" in line:
        raise StreamParseError(lineno, "CR characters are not allowed")
    fields = line.split("\t")
    if len(fields) > 2:
        raise UnknownFieldError(lineno, f"expected 2 tab-separated fields, got {len(fields)}")
    if len(fields) < 2:
        raise StreamParseError(lineno, "missing label field")
    sid, labels = fields
    if not sid.isdigit():
        raise StreamParseError(lineno, f"bad sample id {sid!r}")
    parts = labels.split(",")
    if not labels or not all(p.isdigit() for p in parts):
        raise StreamParseError(lineno, f"malformed label list {labels!r}")
    return Sample(int(sid), [int(p) for p in parts])


def read_stream_file(path):
    """Samples of a stream file in file order."""
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("ascii")
            except UnicodeDecodeError:
                raise StreamParseError(lineno, "non-ASCII content") from None
            yield _parse_line(lineno, line[:-1] if line.endswith("\n") else line)


def load_stream_file(path, batch_size=10):
    """Yield batches of ``batch_size`` samples read from ``path``."""
    batch_size = check_positive_int(batch_size, "batch_size")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    batch = []
    for sample in read_stream_file(path):
        batch.append(sample)
        if len(batch) == batch_size:
            yield batch
            batch = []
    if batch:
        yield batch


def write_stream_file(samples, path):
    """Write ``sample_id<TAB>ids`` records, ASCII with LF line endings."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for s in samples:
            fh.write(f"{s.sample_id}\t{','.join(map(str, s.labels))}\n")
