"""A small sampling benchmark sweep.

Both kernels consume identical keyed draw streams per point, so the timing
difference is pure pipeline cost: the coordinate materialization, the
re-counting, and the conversion that the fused kernel never does.  Scale up
--via generate_rmat(20, 16, ...)-- for the desk-scale headline numbers; this
demo stays small so it runs in seconds.
"""

import tempfile

import numpy as np

from fusedsample import build_csc, generate_rmat
from fusedsample.bench import BenchConfig, read_metrics_csv, run_sample_bench, write_metrics_csv
from fusedsample.graphs import LabelSet
from fusedsample.sampling import FanoutPlan

g = build_csc(generate_rmat(14, 16, seed=5))
labels = LabelSet(np.arange(g.num_nodes))
print(f"graph: {g.num_nodes} nodes, {g.nnz} edges")

cfg = BenchConfig(
    plan=FanoutPlan((15, 10, 5)),
    batch_sizes=(256, 512, 1024),
    repetitions=5,
    warmup=2,
    seed=0,
)
records = run_sample_bench(g, labels, cfg)

print(f"{'batch':>6} {'kernel':>9} {'median ms':>10} {'speedup':>8} {'edges':>8} {'coo allocs':>10}")
for r in records:
    print(
        f"{r.batch_size:>6} {r.kernel:>9} {r.sample_median_s * 1e3:>10.2f} "
        f"{r.speedup:>8.2f} {r.sampled_edges:>8} {r.coo_allocs:>10}"
    )

# Records survive the CSV round trip exactly, so downstream plotting can
# trust the file.
with tempfile.TemporaryDirectory() as td:
    path = f"{td}/sweep.csv"
    write_metrics_csv(path, records)
    assert read_metrics_csv(path) == records
    print("metrics CSV round-trips exactly")
