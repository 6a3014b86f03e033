"""Single-node sampling benchmark harness.

For every batch size in the sweep, both kernels sample the *same* seed
batches (identical keyed draws), so the timing comparison isolates pipeline
cost: the coordinate-buffer materialization and conversion work the fused
kernel skips.  Medians over repeated timed runs, with warmups excluded.
Records round-trip exactly through CSV and JSON.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass, fields

from .errors import ParameterError
from .graphs import CscGraph, FeatureMatrix, LabelSet
from .rng import SamplerRng
from .sampling import (
    FanoutPlan,
    coo_alloc_count,
    reset_alloc_stats,
    sample_minibatch,
    seed_batches,
)

__all__ = [
    "BenchConfig",
    "MetricsRecord",
    "run_sample_bench",
    "write_metrics_csv",
    "read_metrics_csv",
    "write_metrics_json",
    "read_metrics_json",
]


@dataclass(frozen=True)
class BenchConfig:
    """One sweep: a fanout plan crossed with a list of batch sizes."""

    plan: FanoutPlan
    batch_sizes: tuple[int, ...]
    kernels: tuple[str, ...] = ("fused", "two-step")
    repetitions: int = 5
    warmup: int = 2
    seed: int = 0
    include_dst: bool = True

    def __post_init__(self):
        if not self.batch_sizes or any(b < 1 for b in self.batch_sizes):
            raise ParameterError("batch sizes must be >= 1")
        if self.repetitions < 1:
            raise ParameterError("need at least one timed repetition")
        if self.warmup < 0:
            raise ParameterError("warmup count must be >= 0")
        if not self.kernels or any(k not in ("fused", "two-step") for k in self.kernels):
            raise ParameterError("kernels must be drawn from {'fused', 'two-step'}")


@dataclass
class MetricsRecord:
    """One (batch size, kernel) measurement."""

    batch_size: int
    fanouts: str
    kernel: str
    sample_median_s: float
    total_median_s: float
    comm_rounds: int
    bytes_total: int
    speedup: float
    sampled_edges: int
    coo_allocs: int


def _time_kernel(g, batch, cfg: BenchConfig, kernel: str, features: FeatureMatrix | None):
    from .verify import mean_propagate

    rng = SamplerRng(cfg.seed)
    sample_times = []
    total_times = []
    edges = 0
    reset_alloc_stats()
    for rep in range(cfg.warmup + cfg.repetitions):
        if rep == cfg.warmup:
            reset_alloc_stats()
        t0 = time.perf_counter()
        sample = sample_minibatch(g, batch, cfg.plan, rng, kernel, cfg.include_dst)
        t1 = time.perf_counter()
        total = t1 - t0
        if features is not None:
            mean_propagate(sample, features.rows(sample.input_nodes))
            total = time.perf_counter() - t0
        if rep >= cfg.warmup:
            sample_times.append(t1 - t0)
            total_times.append(total)
            edges = sample.total_edges()
    allocs = coo_alloc_count()
    return statistics.median(sample_times), statistics.median(total_times), edges, allocs


def run_sample_bench(
    g: CscGraph,
    labels: LabelSet,
    cfg: BenchConfig,
    features: FeatureMatrix | None = None,
) -> list[MetricsRecord]:
    """Run the sweep and return one record per (batch size, kernel).

    Speedup is the two-step median over this kernel's median at the same
    point (so the baseline rows carry 1.0).  Single-node runs report zero
    communication rounds and bytes.
    """
    rng = SamplerRng(cfg.seed)
    fanouts_text = ",".join(str(f) for f in cfg.plan.fanouts)
    records = []
    for bs in cfg.batch_sizes:
        batch = seed_batches(labels, bs, rng)[0]
        timings = {}
        for kernel in cfg.kernels:
            timings[kernel] = _time_kernel(g, batch, cfg, kernel, features)
        baseline = timings.get("two-step", timings[cfg.kernels[0]])[0]
        for kernel in cfg.kernels:
            sample_s, total_s, edges, allocs = timings[kernel]
            records.append(
                MetricsRecord(
                    batch_size=int(bs),
                    fanouts=fanouts_text,
                    kernel=kernel,
                    sample_median_s=sample_s,
                    total_median_s=total_s,
                    comm_rounds=0,
                    bytes_total=0,
                    speedup=baseline / sample_s,
                    sampled_edges=edges,
                    coo_allocs=allocs,
                )
            )
    return records


_FIELDS = [f.name for f in fields(MetricsRecord)]
_FLOAT_FIELDS = {"sample_median_s", "total_median_s", "speedup"}
_INT_FIELDS = {"batch_size", "comm_rounds", "bytes_total", "sampled_edges", "coo_allocs"}


def write_metrics_csv(path, records: list[MetricsRecord]):
    with open(path, "w", newline="", encoding="ascii") as f:
        w = csv.writer(f)
        w.writerow(_FIELDS)
        for r in records:
            row = []
            for name in _FIELDS:
                v = getattr(r, name)
                row.append(repr(v) if name in _FLOAT_FIELDS else v)
            w.writerow(row)


def _record_from_strings(values: dict) -> MetricsRecord:
    kwargs = {}
    for name in _FIELDS:
        raw = values[name]
        if name in _FLOAT_FIELDS:
            kwargs[name] = float(raw)
        elif name in _INT_FIELDS:
            kwargs[name] = int(raw)
        else:
            kwargs[name] = str(raw)
    return MetricsRecord(**kwargs)


def read_metrics_csv(path) -> list[MetricsRecord]:
    with open(path, newline="", encoding="ascii") as f:
        return [_record_from_strings(row) for row in csv.DictReader(f)]


def write_metrics_json(path, records: list[MetricsRecord]):
    payload = [{name: getattr(r, name) for name in _FIELDS} for r in records]
    with open(path, "w", encoding="ascii") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def read_metrics_json(path) -> list[MetricsRecord]:
    with open(path, encoding="ascii") as f:
        payload = json.load(f)
    return [MetricsRecord(**{name: item[name] for name in _FIELDS}) for item in payload]
