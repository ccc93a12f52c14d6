"""Per-step instrumentation of a strategy running over a stream."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import pad
from .distributions import DistanceKind, KLDirection, counts_distance, target_distribution
from .exceptions import EmptyTraceError
from .streamgen import Tier, tier_classes


@dataclass
class StepRecord:
    step: int
    distance: float
    update_us: float = 0.0
    scan_count: int = 0
    buffer_full: bool = True
    task: int = None
    counts: np.ndarray = None


@dataclass
class RunTrace:
    """Records appended after each completed batch update.

    Class-count snapshots are kept every ``snapshot_every`` steps.
    """

    snapshot_every: int = 1
    steps: list = field(default_factory=list)

    def distances(self):
        return np.array([r.distance for r in self.steps])

    def last_counts(self):
        for rec in reversed(self.steps):
            if rec.counts is not None:
                return rec.counts
        return None


def record_step(trace, buf, freq, rho=0.0, kind=DistanceKind.KL, elapsed_us=0.0, scan_count=0, step=None, task=None, direction=KLDirection.MEMORY_FIRST):
    """Append the current memory-to-target distance to ``trace``."""
    if buf.size == 0:
        raise ValueError("cannot record an empty buffer")
    if step is None:
        step = trace.steps[-1].step + 1 if trace.steps else 0
    if trace.steps and step <= trace.steps[-1].step:
        raise ValueError("step indices must be strictly increasing")
    target = target_distribution(freq, rho)
    dist = counts_distance(buf.counts, target, kind, direction)
    counts = None
    if trace.snapshot_every and step % trace.snapshot_every == 0:
        counts = pad(buf.counts.copy(), len(target))
    trace.steps.append(StepRecord(step, dist, float(elapsed_us), int(scan_count), buf.is_full, task, counts))
    return trace


def run_stream(strategy, batches, rho=0.0, kind=DistanceKind.KL, direction=KLDirection.MEMORY_FIRST, task_of_class=None, snapshot_every=1, timing=True):
    """Feed ``batches`` to a strategy estimator, recording a step after each.

    Timing covers the estimator update only. With ``timing=False`` the
    recorded update time is zero so traces are reproducible byte for byte.
    """
    trace = RunTrace(snapshot_every=snapshot_every)
    strategy._reset()
    for step, batch in enumerate(batches):
        start = time.perf_counter_ns()
        strategy.partial_fit(batch)
        elapsed = (time.perf_counter_ns() - start) / 1000.0 if timing else 0.0
        task = task_of_class.get(batch[0].labels[0]) if task_of_class and batch else None
        record_step(
            trace, strategy.buffer_, strategy.freq_, rho, kind, elapsed,
            strategy.last_report_.scan_count, step, task, direction,
        )
    if trace.steps and trace.steps[-1].counts is None:
        trace.steps[-1].counts = strategy.class_counts_
    return trace


def summarize(trace, tiers=None, final_counts=None):
    """Final distance, mean update time and final class counts per tier.

    ``tiers`` maps class id to :class:`Tier`; when omitted all classes with
    nonzero final count are summarized without a tier split.
    """
    if not trace.steps:
        raise EmptyTraceError("cannot summarize an empty trace")
    counts = trace.last_counts() if final_counts is None else np.asarray(final_counts)
    if counts is None:
        raise EmptyTraceError("trace holds no class-count snapshot")
    if tiers is None:
        classes = np.flatnonzero(counts > 0)
        tier_counts = {}
    else:
        classes = np.array(sorted(tiers), dtype=int)
        counts = pad(counts, int(classes.max()) + 1 if classes.size else 0)
        tier_counts = {t.value: 0 for t in Tier}
        for c, t in tiers.items():
            tier_counts[Tier(t).value] += int(counts[c])
    kept = counts[classes] if classes.size else np.zeros(1, dtype=int)
    return {
        "final_distance": trace.steps[-1].distance,
        "mean_update_us": float(np.mean([r.update_us for r in trace.steps])),
        "tier_counts": tier_counts,
        "max_class_count": int(kept.max()),
        "min_class_count": int(kept.min()),
    }


def segment_quartiles(trace, full_only=True):
    """``(first-quartile mean, last-quartile mean)`` of distance per task segment."""
    segments = {}
    for rec in trace.steps:
        if full_only and not rec.buffer_full:
            continue
        segments.setdefault(rec.task, []).append(rec.distance)
    out = {}
    for task, dists in segments.items():
        q = max(len(dists) // 4, 1)
        out[task] = (float(np.mean(dists[:q])), float(np.mean(dists[-q:])))
    return out


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "distance", "update_us", "scan_count"])
        for r in trace.steps:
            writer.writerow([r.step, repr(r.distance), f"{r.update_us:.3f}", r.scan_count])


def write_histogram_csv(counts, tiers, path):
    """One ``class_id,count,tier`` row per class in ``tiers`` (or per count)."""
    counts = np.asarray(counts)
    classes = sorted(tiers) if tiers else range(len(counts))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class_id", "count", "tier"])
        for c in classes:
            n = int(counts[c]) if c < len(counts) else 0
            writer.writerow([c, n, Tier(tiers[c]).value if tiers else ""])

