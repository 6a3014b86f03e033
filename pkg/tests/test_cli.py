import subprocess
import sys

import pytest

from fusedsample import io as fio
from fusedsample.bench import read_metrics_csv, read_metrics_json
from fusedsample.cli import main
from fusedsample.transport import free_tcp_ports


@pytest.fixture
def dataset(tmp_path):
    graph = tmp_path / "g.fsgr"
    feats = tmp_path / "f.fsft"
    labels = tmp_path / "l.txt"
    rc = main(
        [
            "generate",
            "--rmat",
            "--scale",
            "7",
            "--edge-factor",
            "8",
            "--seed",
            "1",
            "--out",
            str(graph),
            "--features-out",
            str(feats),
            "--features-dim",
            "6",
            "--labels-out",
            str(labels),
            "--labels-count",
            "32",
        ]
    )
    assert rc == 0
    return graph, feats, labels


def test_generate_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.fsgr", tmp_path / "b.fsgr"
    args = ["generate", "--rmat", "--scale", "6", "--edge-factor", "4", "--seed", "9"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_generate_scale_out_of_range(tmp_path):
    rc = main(
        ["generate", "--rmat", "--scale", "40", "--edge-factor", "2", "--out", str(tmp_path / "x")]
    )
    assert rc == 2


def test_generate_erdos_renyi(tmp_path):
    out = tmp_path / "er.fsgr"
    rc = main(
        ["generate", "--erdos-renyi", "--nodes", "50", "--edges", "100", "--out", str(out)]
    )
    assert rc == 0
    assert fio.read_graph_header(out) == (50, 100)


def test_features_from_graph_header(tmp_path, dataset):
    graph, _, _ = dataset
    out = tmp_path / "feat2.fsft"
    assert main(["features", "--graph", str(graph), "--dim", "3", "--out", str(out)]) == 0
    feats = fio.read_features(out)
    assert feats.num_nodes == 128 and feats.dim == 3


def test_partition_methods_and_import(tmp_path, dataset, capsys):
    graph, _, labels = dataset
    out = tmp_path / "map.fspm"
    assert main(
        ["partition", "--graph", str(graph), "--workers", "2", "--method", "greedy",
         "--labels", str(labels), "--out", str(out)]
    ) == 0
    report = capsys.readouterr().out
    assert "edge cut:" in report and "labeled nodes per machine:" in report

    # re-import the produced map
    assert main(
        ["partition", "--graph", str(graph), "--workers", "2", "--method", "import",
         "--import-map", str(out)]
    ) == 0

    # wrong node count -> I/O error exit
    bad = tmp_path / "bad.fspm"
    from fusedsample.partition import partition_hash

    fio.write_partition_map(bad, partition_hash(5, 2))
    rc = main(
        ["partition", "--graph", str(graph), "--workers", "2", "--method", "import",
         "--import-map", str(bad)]
    )
    assert rc == 3


def test_partition_greedy_needs_labels(dataset):
    graph, _, _ = dataset
    assert main(["partition", "--graph", str(graph), "--workers", "2", "--method", "greedy"]) == 2


def test_partition_two_clique_hash_vs_greedy(tmp_path, capsys):
    import itertools

    lines = []
    for base in (0, 10):
        for u, v in itertools.permutations(range(10), 2):
            lines.append(f"{u + base} {v + base}")
    edges = tmp_path / "cliques.txt"
    edges.write_text("\n".join(lines) + "\n")
    coo = fio.read_edgelist_text(edges)
    from fusedsample import build_csc

    graph = tmp_path / "cliques.fsgr"
    fio.write_graph(graph, build_csc(coo))
    labels = tmp_path / "cl.txt"
    labels.write_text("\n".join(str(i) for i in range(20)) + "\n")

    assert main(["partition", "--graph", str(graph), "--workers", "2", "--method", "greedy",
                 "--labels", str(labels)]) == 0
    greedy_out = capsys.readouterr().out
    assert "edge cut: 0" in greedy_out

    assert main(["partition", "--graph", str(graph), "--workers", "2", "--method", "hash"]) == 0
    hash_out = capsys.readouterr().out
    assert "edge cut: 0 " not in hash_out


def test_report_from_table_values(capsys):
    rc = main(["report", "--nodes", "111000000", "--edges", "3200000000", "--dim", "128"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "topology bytes: 13244000004" in out
    assert "topology fraction: 0.1890" in out


def test_report_needs_a_size_source():
    assert main(["report", "--dim", "4"]) == 2


def test_sample_bench_csv_and_json(tmp_path, dataset, capsys):
    graph, _, labels = dataset
    out_csv = tmp_path / "m.csv"
    rc = main(
        ["sample-bench", "--graph", str(graph), "--labels", str(labels),
         "--fanouts", "3,2", "--batch-sizes", "8,16", "--reps", "2", "--warmup", "1",
         "--out", str(out_csv)]
    )
    assert rc == 0
    records = read_metrics_csv(out_csv)
    assert {r.kernel for r in records} == {"fused", "two-step"}
    assert all(r.coo_allocs == 0 for r in records if r.kernel == "fused")

    out_json = tmp_path / "m.json"
    rc = main(
        ["sample-bench", "--graph", str(graph), "--labels", str(labels),
         "--fanouts", "3,2", "--batch-sizes", "8", "--reps", "2", "--warmup", "0",
         "--out", str(out_json), "--format", "json"]
    )
    assert rc == 0
    assert len(read_metrics_json(out_json)) == 2


def test_sample_bench_missing_graph(tmp_path):
    rc = main(["sample-bench", "--graph", str(tmp_path / "nope.fsgr"), "--fanouts", "2"])
    assert rc == 3


def test_dist_bench_inproc(dataset, capsys):
    graph, feats, labels = dataset
    rc = main(
        ["dist-bench", "--graph", str(graph), "--features", str(feats), "--labels", str(labels),
         "--workers", "2", "--mode", "hybrid", "--fanouts", "3,2,2", "--batch-size", "8",
         "--transport", "inproc"]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "rounds/minibatch=2" in out
    rc = main(
        ["dist-bench", "--graph", str(graph), "--features", str(feats), "--labels", str(labels),
         "--workers", "2", "--mode", "full", "--fanouts", "3,2,2", "--batch-size", "8",
         "--transport", "inproc"]
    )
    assert rc == 0
    assert "rounds/minibatch=6" in capsys.readouterr().out


def test_dist_bench_tcp_subprocesses(dataset):
    graph, feats, labels = dataset
    ports = free_tcp_ports(2)
    peers = ",".join(f"127.0.0.1:{p}" for p in ports)
    procs = [
        subprocess.Popen(
            [sys.executable, "-m", "fusedsample.cli", "dist-bench",
             "--graph", str(graph), "--features", str(feats), "--labels", str(labels),
             "--workers", "2", "--mode", "hybrid", "--fanouts", "3,2",
             "--batch-size", "8", "--transport", "tcp", "--rank", str(rank),
             "--peers", peers],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        for rank in range(2)
    ]
    outs = [p.communicate(timeout=120)[0] for p in procs]
    assert all(p.returncode == 0 for p in procs), outs
    assert "rounds/minibatch=2" in outs[0]


def test_verify_kernel_suite(tmp_path):
    out = tmp_path / "summary.json"
    assert main(["verify", "kernel", "--trials", "25", "--seed", "1", "--out", str(out)]) == 0
    import json

    summary = json.loads(out.read_text())
    assert summary["passed"] is True and summary["trials"] == 25


def test_verify_dist_suite():
    rc = main(
        ["verify", "dist", "--workers", "2", "--mode", "hybrid", "--scale", "6",
         "--edge-factor", "4", "--labels-count", "12", "--fanouts", "3,2"]
    )
    assert rc == 0


def test_verify_unknown_suite_is_usage_error():
    assert main(["verify", "nonsense"]) == 2


def test_unknown_command_is_usage_error():
    assert main(["frobnicate"]) == 2
