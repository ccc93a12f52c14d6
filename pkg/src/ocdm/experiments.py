"""Experiment drivers behind the command-line subcommands."""

import gc
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .core import Sample, rebuild_counts
from .distributions import target_distribution
from .metrics import run_stream, summarize
from .oracle import check_instance, greedy_gap
from .strategies import make_strategy
from .streamgen import StreamSpec, generate_stream, load_stream_file, long_tailed_stream, tier_classes


@dataclass
class ExperimentConfig:
    strategy: str = "ocdm"
    rho: float = 0.0
    distance: str = "kl"
    kl_direction: str = "memory_first"
    memory: int = 1000
    batch: int = 10
    seeds: list = field(default_factory=lambda: [0])
    stream_file: str = None
    stream_spec: StreamSpec = None
    snapshot_every: int = 1
    timing: bool = True

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    def batches(self, seed):
        if self.stream_file:
            return list(load_stream_file(self.stream_file, self.batch)), None
        spec = self.stream_spec or long_tailed_stream()
        spec = replace(spec, seed=seed, batch_size=self.batch)
        return list(generate_stream(spec)), spec.task_of_class()


@dataclass
class RunResult:
    seed: int
    trace: object
    summary: dict
    final_counts: np.ndarray
    tiers: dict


def run_one(config, seed):
    """Run ``config.strategy`` over the stream for one seed."""
    batches, task_of_class = config.batches(seed)
    est = make_strategy(config.strategy, config.memory, config.rho, config.distance, config.kl_direction, seed)
    trace = run_stream(
        est, batches, config.rho, config.distance, config.kl_direction,
        task_of_class, config.snapshot_every, config.timing,
    )
    tiers = tier_classes(est.freq_)
    counts = est.class_counts_
    return RunResult(seed, trace, summarize(trace, tiers, counts), counts, tiers)


def random_pool(n_pool, n_classes, rng, single_label=True, colabel=0.5):
    """Random pool of samples over ``n_classes`` classes for oracle studies."""
    pool = []
    for i in range(n_pool):
        labels = {int(rng.integers(n_classes))}
        if not single_label:
            labels.update(int(c) for c in np.flatnonzero(rng.random(n_classes) < colabel))
        pool.append(Sample(i, labels))
    return pool


def oracle_gap_study(pool_size=12, memory=8, n_classes=3, instances=20, trials=10, single_label=True, colabel=0.5, rho=0.0, distance="kl", kl_direction="memory_first", seed=0):
    """Greedy-vs-exact gap statistics over random pools.

    The target is the allocation target of the pool's own label frequencies.
    """
    check_instance(pool_size, memory)
    rng = np.random.default_rng(seed)
    rows = []
    for inst in range(instances):
        pool = random_pool(pool_size, n_classes, rng, single_label, colabel)
        target = target_distribution(rebuild_counts(pool), rho)
        gap = greedy_gap(pool, memory, target, distance, trials, rng, kl_direction)
        rows.append(
            {
                "instance": inst,
                "suite": "single" if single_label else "multi",
                "pool_size": pool_size,
                "memory": memory,
                "best_distance": gap.best_distance,
                "mean_gap": gap.mean_gap,
                "max_gap": gap.max_gap,
                "match_rate": gap.match_rate,
            }
        )
    return rows


def expected_scan_count(memory, batch):
    """Candidate evaluations of one full-buffer greedy update."""
    return sum(memory + batch - i for i in range(batch))


def bench(config, memory_values, max_steps=200, strategies=("ocdm",)):
    """Update time and scan count per full-buffer step for each memory size.

    The estimators for all memory sizes consume the stream in lockstep.
    Measurement starts once every buffer is full and covers the same full
    batches for every size, so each measured step performs ``batch``
    deletions on the same stream content, and background load or clock
    drift hits every size alike. The linear fit uses the median step time,
    which ignores scheduler spikes.
    """
    seed = config.seeds[0]
    batches, _ = config.batches(seed)
    rows = []
    for name in strategies:
        runs = []
        for m in memory_values:
            est = make_strategy(name, m, config.rho, config.distance, config.kl_direction, seed)
            est._reset()
            runs.append((m, est, [], []))
        gc_was_enabled = gc.isenabled()
        gc.disable()
        try:
            for batch in batches:
                if all(len(times) >= max_steps for _, _, times, _ in runs):
                    break
                measured = all(est.buffer_.is_full for _, est, _, _ in runs) and len(batch) == config.batch
                for _, est, times, scans in runs:
                    start = time.perf_counter_ns()
                    est.partial_fit(batch)
                    elapsed = (time.perf_counter_ns() - start) / 1000.0
                    if measured:
                        times.append(elapsed)
                        scans.append(est.last_report_.scan_count)
        finally:
            if gc_was_enabled:
                gc.enable()
        for m, _, times, scans in runs:
            if not times:
                raise ValueError(f"stream too short to fill a memory of {m}")
            greedy = name == "ocdm"
            expected = expected_scan_count(m, config.batch) if greedy else ""
            rows.append(
                {
                    "strategy": name,
                    "memory": m,
                    "mean_update_us": float(np.mean(times)),
                    "median_update_us": float(np.median(times)),
                    "mean_scan_count": float(np.mean(scans)),
                    "expected_scan_count": expected,
                    "scan_exact": all(s == expected for s in scans) if greedy else "",
                    "n_steps": len(times),
                }
            )
    fits = []
    for name in strategies:
        sub = [r for r in rows if r["strategy"] == name]
        if len(sub) >= 2:
            fit = stats.linregress([r["memory"] for r in sub], [r["median_update_us"] for r in sub])
            fits.append({"strategy": name, "slope_us": fit.slope, "intercept_us": fit.intercept, "r_squared": fit.rvalue**2})
    return rows, fits
