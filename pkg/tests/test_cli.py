"""End-to-end command pipeline: synth -> search -> derive -> train/eval -> bench."""

import numpy as np
import pytest

from metamultigraph import load_hin
from metamultigraph.artifacts import (
    read_alpha,
    read_architecture,
    read_eval_report,
    read_planted_truth,
    read_splits,
    read_stability,
)
from metamultigraph.cli import main

from helpers import write_ini

INI_SECTIONS = {
    "run": {"task": "classification", "seed": "0"},
    "synth": {
        "types": "A:60,P:40,C:30",
        "relations": "AP:A:P:3,PC:P:C:3",
        "chains": "AP>PC",
        "groups": "3",
        "noise": "0.0",
        "distractors": "1",
    },
    "search": {
        "mode": "partial",
        "epochs": "2",
        "runs": "2",
        "depth": "2",
        "hidden": "8",
        "lr_alpha": "0.05",
    },
    "train": {"epochs": "3", "hidden": "8", "eval_seeds": "2"},
    "bench": {
        "modes": "partial",
        "seeds": "0-1",
        "steps": "2",
        "train_seeds": "1",
        "workers": "1",
    },
}


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ini = write_ini(root / "run.ini", INI_SECTIONS)
    data = root / "data"
    assert main(["synth", "--config", str(ini), "--out", str(data)]) == 0
    return root, str(ini), data


def test_synth_writes_loadable_dataset(cli_env):
    _, _, data = cli_env
    graph = load_hin(data)
    assert graph.node_counts["A"] == 60
    assert set(graph.relations) == {"AP", "PC", "noise0"}
    splits = read_splits(data / "splits.json")
    splits.validate(graph)
    assert len(splits.train) == 36
    truth = read_planted_truth(data / "planted_truth.json")
    assert truth.required == {(0, 1): ("PC",), (1, 2): ("AP",)}


def test_full_pipeline_and_rerun_determinism(cli_env):
    root, ini, data = cli_env
    runs = root / "runs"
    args = ["--config", ini, "--dataset", str(data), "--out", str(runs)]

    assert main(["search", *args]) == 0
    assert (runs / "best_run.txt").read_text().strip() in ("run_0", "run_1")
    snap, meta = read_alpha(runs / "run_0" / "alpha.json")
    assert snap.depth == 2
    assert meta["seed"] == 0
    assert meta["mode"] == "partial"
    log = (runs / "run_1" / "search_log.csv").read_text().splitlines()
    assert log[0] == "epoch,train_loss,val_loss,val_metric"
    assert len(log) == 3

    watched = [
        runs / "best_run.txt",
        runs / "run_0" / "alpha.json",
        runs / "run_1" / "alpha.json",
        runs / "run_0" / "search_log.csv",
    ]
    before = [p.read_bytes() for p in watched]
    assert main(["search", *args]) == 0
    assert [p.read_bytes() for p in watched] == before

    arch_dir = root / "arch"
    assert main([
        "derive", "--config", ini, "--search-out", str(runs), "--out", str(arch_dir),
    ]) == 0
    arch, _ = read_architecture(arch_dir / "architecture.json")
    assert arch.depth == 2
    assert all(len(v) >= 1 for v in arch.retained.values())
    arch_bytes = (arch_dir / "architecture.json").read_bytes()
    assert main([
        "derive", "--config", ini, "--search-out", str(runs), "--out", str(arch_dir),
    ]) == 0
    assert (arch_dir / "architecture.json").read_bytes() == arch_bytes

    single_dir = root / "arch_single"
    assert main([
        "derive", "--config", ini, "--search-out", str(runs),
        "--out", str(single_dir), "--single-path",
    ]) == 0
    single, _ = read_architecture(single_dir / "architecture.json")
    assert all(len(v) == 1 for v in single.retained.values())

    train_dir = root / "train"
    assert main([
        "train", *["--config", ini, "--dataset", str(data), "--out", str(train_dir)],
        "--arch", str(arch_dir / "architecture.json"),
    ]) == 0
    report, _ = read_eval_report(train_dir / "eval_report.json")
    assert report.seeds == [0]
    assert set(report.mean) == {"macro_f1", "micro_f1"}
    preds = (train_dir / "predictions.tsv").read_text().splitlines()
    assert preds[0] == "node\ttrue\tpred"
    assert len(preds) == 1 + 12

    eval_dir = root / "eval"
    eval_args = [
        "eval", "--config", ini, "--dataset", str(data), "--out", str(eval_dir),
        "--arch", str(arch_dir / "architecture.json"),
    ]
    assert main(eval_args) == 0
    report, _ = read_eval_report(eval_dir / "eval_report.json")
    assert report.seeds == [0, 1]
    eval_bytes = (eval_dir / "eval_report.json").read_bytes()
    assert main(eval_args) == 0
    assert (eval_dir / "eval_report.json").read_bytes() == eval_bytes


def test_bench_stability_command(cli_env):
    root, ini, data = cli_env
    out = root / "bench"
    args = [
        "bench-stability", "--config", ini, "--dataset", str(data), "--out", str(out),
    ]
    assert main(args) == 0
    rows = read_stability(out / "stability.csv")
    assert [(r["mode"], r["steps"], r["seed"]) for r in rows] == [
        ("partial", 2, 0), ("partial", 2, 1),
    ]
    assert all(r["status"] == "ok" for r in rows)
    assert all(r["metric_std"] == 0.0 for r in rows)
    before = (out / "stability.csv").read_bytes()
    assert main(args) == 0
    assert (out / "stability.csv").read_bytes() == before


def test_seed_override_moves_run_directories(cli_env):
    root, ini, data = cli_env
    out = root / "seeded"
    assert main([
        "search", "--config", ini, "--dataset", str(data), "--out", str(out),
        "--seed", "5",
    ]) == 0
    assert (out / "run_5" / "alpha.json").is_file()
    assert (out / "run_6" / "alpha.json").is_file()
    assert not (out / "run_0").exists()
    assert (out / "best_run.txt").read_text().strip() in ("run_5", "run_6")


def test_error_exits(cli_env, tmp_path, capsys):
    root, ini, data = cli_env

    assert main(["search", "--config", str(tmp_path / "nope.ini")]) == 2
    assert capsys.readouterr().err.startswith("E_CONFIG:")

    assert main(["search", "--out", str(tmp_path / "o1")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("E_CONFIG:")
    assert "dataset" in err

    assert main(["synth", "--config", ini]) == 2
    assert "out" in capsys.readouterr().err

    assert main([
        "search", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path / "o2"),
    ]) == 2
    assert capsys.readouterr().err.startswith("E_")

    empty = tmp_path / "empty"
    empty.mkdir()
    assert main([
        "derive", "--search-out", str(empty), "--out", str(tmp_path / "o3"),
    ]) == 2
    err = capsys.readouterr().err
    assert err.startswith("E_ARTIFACT:")
    assert "run search first" in err

    assert main([
        "search", "--config", ini, "--dataset", str(data),
        "--out", str(tmp_path / "o4"), "--task", "recommendation",
    ]) == 2
    err = capsys.readouterr().err
    assert err.startswith("E_CONFIG:")
    assert "task" in err

    assert main([
        "train", "--dataset", str(data), "--out", str(tmp_path / "o5"),
        "--config", ini,
    ]) == 2
    assert capsys.readouterr().err.startswith("E_ARTIFACT:")
