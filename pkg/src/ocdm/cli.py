"""Command-line harness: ``ocdm run | oracle-gap | bench | gen``.

Every flag can also be set in a flat ``key = value`` config file passed with
``--config``; keys are the flag names without the leading dashes. Values on
the command line override the file, which overrides the defaults.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .exceptions import InstanceTooLargeError, StreamParseError
from .experiments import ExperimentConfig, bench, oracle_gap_study, run_one
from .metrics import write_histogram_csv, write_trace_csv
from .strategies import STRATEGIES
from .streamgen import (
    StreamSpec,
    generate_samples,
    long_tailed_stream,
    reorder_tasks,
    write_stream_file,
)


class ConfigError(ValueError):
    pass


def _int_list(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _str_list(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _default_seeds():
    return os.environ.get("OCDM_SEED", "0")


COMMON = {
    "out": (str, "out", "output directory"),
    "seeds": (_int_list, None, "comma-separated seeds (default: $OCDM_SEED or 0)"),
    "jobs": (int, 1, "parallel worker processes"),
}

STREAM = {
    "stream-file": (str, None, "read batches from a stream file instead of generating"),
    "stream-spec": (str, None, "JSON stream specification"),
    "tasks": (int, 4, "number of synthetic tasks"),
    "classes-per-task": (int, 5, "classes per synthetic task"),
    "max-class-size": (int, 1500, "largest synthetic class size"),
    "min-class-size": (int, 40, "smallest synthetic class size"),
    "colabel": (float, 0.9, "co-labeling probability"),
    "task-order": (_int_list, None, "task permutation, e.g. 3,0,1,2"),
    "batch": (int, 10, "stream batch size"),
}

GREEDY = {
    "distance": (str, "kl", "kl or tv"),
    "kl-direction": (str, "memory_first", "memory_first or target_first"),
}

COMMANDS = {
    "run": {
        **COMMON,
        **STREAM,
        **GREEDY,
        "strategy": (str, "ocdm", "one of " + ", ".join(sorted(STRATEGIES))),
        "rho": (_float_list, [0.0], "allocation power(s), comma-separated for a sweep"),
        "memory": (int, 1000, "memory capacity"),
        "snapshot-every": (int, 1, "keep class-count snapshots every N steps"),
        "timing": (_bool, True, "record wall-clock update times"),
    },
    "oracle-gap": {
        **COMMON,
        **GREEDY,
        "pool-size": (int, 12, "pool size"),
        "memory": (int, 8, "subset size kept"),
        "classes": (int, 3, "number of classes"),
        "instances": (int, 20, "random pools per suite"),
        "trials": (int, 10, "greedy runs per pool"),
        "suite": (str, "both", "single, multi or both"),
        "colabel": (float, 0.5, "extra-label probability in the multi-label suite"),
        "rho": (float, 0.0, "allocation power"),
    },
    "bench": {
        **COMMON,
        **STREAM,
        **GREEDY,
        "memory-values": (_int_list, [250, 500, 1000, 2000], "memory sizes"),
        "steps": (int, 200, "measured full-buffer steps per memory size"),
        "strategies": (_str_list, ["ocdm", "reservoir"], "strategies to time"),
        "rho": (float, 0.0, "allocation power"),
    },
    "gen": {**COMMON, **STREAM},
}


def build_parser():
    parser = argparse.ArgumentParser(prog="ocdm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key = value config file")
        for key, (_, default, help_text) in options.items():
            dest = key.replace("-", "_")
            if key == "timing":
                p.add_argument("--timing", dest=dest, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS, help=help_text)
            else:
                p.add_argument(f"--{key}", dest=dest, default=argparse.SUPPRESS, help=f"{help_text} (default: {default})")
    return parser


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.lstrip("-").replace("_", "-")] = value
    return values


def resolve_options(command, args):
    """Merge defaults, config file and flags, in increasing precedence."""
    options = COMMANDS[command]
    raw = read_config_file(args.config) if args.config else {}
    unknown = set(raw) - set(options)
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(sorted(unknown))}")
    for key in options:
        dest = key.replace("-", "_")
        if hasattr(args, dest):
            raw[key] = getattr(args, dest)
    resolved = {}
    for key, (convert, default, _) in options.items():
        dest = key.replace("-", "_")
        if key in raw:
            try:
                resolved[dest] = convert(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        else:
            resolved[dest] = default
    if "seeds" in resolved and resolved["seeds"] is None:
        try:
            resolved["seeds"] = _int_list(_default_seeds())
        except ValueError:
            raise ConfigError("OCDM_SEED must be a comma-separated list of integers") from None
    if "seeds" in resolved and not resolved["seeds"]:
        raise ConfigError("at least one seed is required")
    return resolved


def stream_spec_from(opts):
    if opts["stream_spec"]:
        try:
            with open(opts["stream_spec"]) as fh:
                spec = StreamSpec.from_dict(json.load(fh))
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load stream spec {opts['stream_spec']}: {exc}") from None
    else:
        try:
            spec = long_tailed_stream(
                opts["tasks"], opts["classes_per_task"], opts["max_class_size"],
                opts["min_class_size"], opts["colabel"], opts["batch"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if opts["task_order"]:
        try:
            spec = reorder_tasks(spec, opts["task_order"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return spec


def _fmt(value):
    return repr(float(value)) if isinstance(value, (float, np.floating)) else value


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def _config(**kwargs):
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _run_job(job):
    config, seed = job
    return run_one(config, seed)


def cmd_run(opts):
    if opts["strategy"] not in STRATEGIES:
        raise ConfigError(f"unknown strategy {opts['strategy']!r}")
    base = _config(
        strategy=opts["strategy"],
        distance=opts["distance"],
        kl_direction=opts["kl_direction"],
        memory=opts["memory"],
        batch=opts["batch"],
        seeds=opts["seeds"],
        stream_file=opts["stream_file"],
        stream_spec=None if opts["stream_file"] else stream_spec_from(opts),
        snapshot_every=opts["snapshot_every"],
        timing=opts["timing"],
    )
    bad = [rho for rho in opts["rho"] if not 0.0 <= rho <= 1.0]
    if bad:
        raise ConfigError(f"rho must lie in [0, 1], got {bad[0]}")
    configs = [replace(base, rho=rho) for rho in opts["rho"]]
    jobs = [(cfg, seed) for cfg in configs for seed in base.seeds]
    if opts["jobs"] > 1:
        with ProcessPoolExecutor(opts["jobs"]) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    os.makedirs(opts["out"], exist_ok=True)
    rows = []
    for (cfg, seed), res in zip(jobs, results):
        stem = f"{cfg.strategy}_rho{cfg.rho:g}_seed{seed}"
        write_trace_csv(res.trace, os.path.join(opts["out"], f"trace_{stem}.csv"))
        write_histogram_csv(res.final_counts, res.tiers, os.path.join(opts["out"], f"hist_{stem}.csv"))
        s = res.summary
        rows.append(
            {
                "strategy": cfg.strategy,
                "rho": cfg.rho,
                "seed": seed,
                "final_distance": s["final_distance"],
                "mean_update_us": s["mean_update_us"],
                "majority": s["tier_counts"]["majority"],
                "moderate": s["tier_counts"]["moderate"],
                "minority": s["tier_counts"]["minority"],
                "max_class_count": s["max_class_count"],
                "min_class_count": s["min_class_count"],
            }
        )
    for cfg in configs:
        sub = [r for r in rows if r["rho"] == cfg.rho]
        mean = {k: float(np.mean([r[k] for r in sub])) for k in list(sub[0])[3:]}
        rows.append({"strategy": cfg.strategy, "rho": cfg.rho, "seed": "mean", **mean})
    _write_rows(os.path.join(opts["out"], "summary.csv"), rows)
    return 0


def cmd_oracle_gap(opts):
    suites = {"single": [True], "multi": [False], "both": [True, False]}.get(opts["suite"])
    if suites is None:
        raise ConfigError(f"suite must be single, multi or both, got {opts['suite']!r}")
    rows = []
    for single in suites:
        rows += oracle_gap_study(
            opts["pool_size"], opts["memory"], opts["classes"], opts["instances"], opts["trials"],
            single, opts["colabel"], opts["rho"], opts["distance"], opts["kl_direction"], opts["seeds"][0],
        )
    os.makedirs(opts["out"], exist_ok=True)
    _write_rows(os.path.join(opts["out"], "oracle_gap.csv"), rows)
    lines = []
    single_rows = [r for r in rows if r["suite"] == "single"]
    if single_rows:
        rate = float(np.mean([r["match_rate"] for r in single_rows]))
        verdict = "PASS" if rate == 1.0 else "FAIL"
        lines.append(f"single_label_match_rate={rate!r} {verdict}")
    multi_rows = [r for r in rows if r["suite"] == "multi"]
    if multi_rows:
        lines.append(f"multi_label_mean_gap={float(np.mean([r['mean_gap'] for r in multi_rows]))!r}")
        lines.append(f"multi_label_max_gap={float(np.max([r['max_gap'] for r in multi_rows]))!r}")
        lines.append(f"multi_label_match_rate={float(np.mean([r['match_rate'] for r in multi_rows]))!r}")
    with open(os.path.join(opts["out"], "oracle_gap_summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0 if not single_rows or lines[0].endswith("PASS") else 1


def cmd_bench(opts):
    unknown = [s for s in opts["strategies"] if s not in STRATEGIES]
    if unknown:
        raise ConfigError(f"unknown strategies: {', '.join(unknown)}")
    config = _config(
        rho=opts["rho"],
        distance=opts["distance"],
        kl_direction=opts["kl_direction"],
        batch=opts["batch"],
        seeds=opts["seeds"],
        stream_file=opts["stream_file"],
        stream_spec=None if opts["stream_file"] else stream_spec_from(opts),
    )
    rows, fits = bench(config, opts["memory_values"], opts["steps"], opts["strategies"])
    os.makedirs(opts["out"], exist_ok=True)
    _write_rows(os.path.join(opts["out"], "bench.csv"), rows)
    _write_rows(os.path.join(opts["out"], "bench_fit.csv"), fits)
    for fit in fits:
        print(f"{fit['strategy']}: slope={fit['slope_us']:.4f} us/slot r2={fit['r_squared']:.4f}")
    return 0


def cmd_gen(opts):
    spec = stream_spec_from(opts)
    os.makedirs(opts["out"], exist_ok=True)
    for seed in opts["seeds"]:
        write_stream_file(generate_samples(replace(spec, seed=seed)), os.path.join(opts["out"], f"stream_seed{seed}.tsv"))
    return 0


HANDLERS = {"run": cmd_run, "oracle-gap": cmd_oracle_gap, "bench": cmd_bench, "gen": cmd_gen}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args.command, args)
        return HANDLERS[args.command](opts)
    except (ConfigError, InstanceTooLargeError) as exc:
        print(f"ocdm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (StreamParseError, OSError, ValueError) as exc:
        print(f"ocdm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
