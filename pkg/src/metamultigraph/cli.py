"""Command-line pipeline: synth, search, derive, train, eval, bench-stability.

Every command takes ``--config`` (INI), plus flags that override config
keys; ``--seed``, ``--out``, and ``--dataset`` are shared. Outputs are
deterministic: rerunning a command with the same config and dataset
reproduces artifact files byte for byte. Failures print one
``E_<CODE>: message`` line to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import artifacts
from .bench import TrainParams, run_stability_bench
from .config import RunConfig, load_config
from .derive import derive_multigraph, derive_single_path
from .errors import ArtifactError, ConfigError, MultigraphError
from .graphs import load_hin, write_hin
from .search import run_search_multi
from .synth import generate_hin
from .targetnet import (
    EvalReport,
    build_target,
    evaluate_auc,
    evaluate_classification,
    predict_classes,
    predict_pair_scores,
    repeat_eval,
    train_target,
)
from .validation import check_seed


def _require(value: str, what: str) -> str:
    if not value:
        raise ConfigError(f"{what} is required (set it via flag or config file)")
    return value


def _resolve(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.run.seed = check_seed(args.seed)
    if getattr(args, "out", None):
        cfg.run.out = args.out
    if getattr(args, "dataset", None):
        cfg.run.dataset = args.dataset
    if getattr(args, "task", None):
        cfg.run.task = args.task
    for key in ("mode", "epochs", "p", "depth", "hidden", "runs"):
        val = getattr(args, f"search_{key}", None)
        if val is not None:
            setattr(cfg.search, key, val)
    for key in ("lambda_seq", "lambda_res"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg.derive, key, val)
    for key in ("epochs", "eval_seeds"):
        val = getattr(args, f"train_{key}", None)
        if val is not None:
            setattr(cfg.train, key, val)
    for key in ("seeds", "steps", "modes", "train_seeds", "workers"):
        val = getattr(args, f"bench_{key}", None)
        if val is not None:
            setattr(cfg.bench, key, val)
    for key in ("noise", "distractors"):
        val = getattr(args, f"synth_{key}", None)
        if val is not None:
            setattr(cfg.synth, key, val)
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(_require(cfg.run.out, "--out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(cfg: RunConfig):
    root = Path(_require(cfg.run.dataset, "--dataset"))
    graph = load_hin(root)
    splits = artifacts.read_splits(root / "splits.json")
    if splits.task != cfg.run.task:
        raise ConfigError(
            f"dataset task is {splits.task!r} but run.task is {cfg.run.task!r}; "
            "set run.task (or --task) to match"
        )
    splits.validate(graph)
    return graph, splits


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    spec = cfg.synth_spec()
    graph, splits, truth = generate_hin(spec)
    out = _out_dir(cfg)
    write_hin(graph, out)
    artifacts.write_splits(out / "splits.json", splits)
    artifacts.write_planted_truth(out / "planted_truth.json", truth)
    print(
        f"synth: wrote {graph.total_nodes} nodes, {len(graph.relations)} relations, "
        f"{truth.n_classes} classes to {out}"
    )
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    graph, splits = _load_dataset(cfg)
    out = _out_dir(cfg)
    cfg_hash = cfg.hash()
    best, outcomes = run_search_multi(cfg.search_config(), graph, splits)
    for oc in outcomes:
        run_dir = out / f"run_{oc.seed}"
        artifacts.write_alpha(
            run_dir / "alpha.json", oc.snapshot, oc.seed, oc.mode, oc.val_metric, cfg_hash
        )
        artifacts.write_search_log(run_dir / "search_log.csv", oc.history)
    run_dir = out / f"run_{best.seed}"
    (out / "best_run.txt").write_text(f"run_{best.seed}\n")
    print(f"search: best run_{best.seed} val_metric={best.val_metric:.6f} -> {run_dir}")
    return 0


def cmd_derive(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    if args.alpha:
        alpha_path = Path(args.alpha)
    else:
        search_out = Path(args.search_out) if args.search_out else Path(_require(cfg.run.out, "--out"))
        marker = search_out / "best_run.txt"
        if not marker.is_file():
            raise ArtifactError(f"{marker}: file does not exist (run search first)")
        alpha_path = search_out / marker.read_text().strip() / "alpha.json"
    snapshot, _meta = artifacts.read_alpha(alpha_path)
    if args.single_path:
        arch = derive_single_path(snapshot)
    else:
        arch = derive_multigraph(snapshot, cfg.derive_config())
    out = _out_dir(cfg)
    artifacts.write_architecture(out / "architecture.json", arch, cfg.hash())
    kept = sum(len(v) for v in arch.retained.values())
    print(
        f"derive: retained {kept} candidates over {len(arch.retained)} edges "
        f"-> {out / 'architecture.json'}"
    )
    return 0


def _single_seed_report(net, graph, splits, seed: int) -> EvalReport:
    if splits.task == "classification":
        macro, micro = evaluate_classification(net, graph, splits.test)
        row = {"seed": seed, "macro_f1": macro, "micro_f1": micro}
    else:
        row = {"seed": seed, "auc": evaluate_auc(net, graph, splits.test)}
    names = [k for k in row if k != "seed"]
    return EvalReport(
        task=splits.task,
        seeds=[seed],
        per_seed=[row],
        mean={k: float(row[k]) for k in names},
        std={k: 0.0 for k in names},
    )


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    graph, splits = _load_dataset(cfg)
    out = _out_dir(cfg)
    arch_path = Path(args.arch) if args.arch else out / "architecture.json"
    arch, _h = artifacts.read_architecture(arch_path)
    net = build_target(
        arch, graph, cfg.train.hidden, seed=cfg.run.seed, task=splits.task,
        transform=cfg.train.transform, pair_relation=splits.pair_relation,
    )
    train_target(
        net, graph, splits, epochs=cfg.train.epochs, lr=cfg.train.lr,
        weight_decay=cfg.train.weight_decay, patience=cfg.train.patience,
    )
    report = _single_seed_report(net, graph, splits, cfg.run.seed)
    artifacts.write_eval_report(out / "eval_report.json", report, cfg.hash())
    if splits.task == "classification":
        off = graph.offset(graph.label_type)
        preds = predict_classes(net, splits.test)
        rows = [
            [int(off + n), int(graph.labels[n]), int(p)]
            for n, p in zip(splits.test, preds)
        ]
        artifacts.write_table(out / "predictions.tsv", ["node", "true", "pred"], rows)
    else:
        scores = predict_pair_scores(net, splits.test[:, :2])
        rows = [
            [int(s), int(d), int(lab), float(sc)]
            for (s, d, lab), sc in zip(splits.test, scores)
        ]
        artifacts.write_table(out / "predictions.tsv", ["src", "dst", "label", "score"], rows)
    metrics = " ".join(f"{k}={v:.6f}" for k, v in report.mean.items())
    print(f"train: seed {cfg.run.seed} test {metrics} -> {out / 'eval_report.json'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    graph, splits = _load_dataset(cfg)
    out = _out_dir(cfg)
    arch_path = Path(args.arch) if args.arch else out / "architecture.json"
    arch, _h = artifacts.read_architecture(arch_path)
    report = repeat_eval(
        arch, graph, splits, n_seeds=cfg.train.eval_seeds, hidden=cfg.train.hidden,
        epochs=cfg.train.epochs, lr=cfg.train.lr, weight_decay=cfg.train.weight_decay,
        patience=cfg.train.patience, transform=cfg.train.transform,
    )
    artifacts.write_eval_report(out / "eval_report.json", report, cfg.hash())
    metrics = " ".join(
        f"{k}={report.mean[k]:.6f}+-{report.std[k]:.6f}" for k in sorted(report.mean)
    )
    print(f"eval: {len(report.seeds)} seeds test {metrics} -> {out / 'eval_report.json'}")
    return 0


def cmd_bench_stability(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    graph, splits = _load_dataset(cfg)
    out = _out_dir(cfg)
    train = TrainParams(
        hidden=cfg.train.hidden, epochs=cfg.train.epochs, lr=cfg.train.lr,
        weight_decay=cfg.train.weight_decay, patience=cfg.train.patience,
        transform=cfg.train.transform,
    )
    rows = run_stability_bench(
        graph, splits, cfg.search_config(), cfg.derive_config(), train,
        seeds=cfg.bench_seeds(), steps=cfg.bench_steps(), modes=cfg.bench_modes(),
        train_seeds=cfg.bench.train_seeds, workers=cfg.bench.workers,
    )
    artifacts.write_stability(out / "stability.csv", rows)
    n_ok = sum(r.status == "ok" for r in rows)
    print(f"bench-stability: {n_ok}/{len(rows)} cells ok -> {out / 'stability.csv'}")
    return 0


def _add_common(sub: argparse.ArgumentParser, dataset: bool = True) -> None:
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--seed", type=int, help="override run.seed")
    sub.add_argument("--out", help="override run.out (output directory)")
    sub.add_argument("--task", choices=["classification", "recommendation"],
                     help="override run.task")
    if dataset:
        sub.add_argument("--dataset", help="override run.dataset (dataset directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmg",
        description="Meta-multigraph architecture search on heterogeneous graphs",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a planted synthetic dataset")
    _add_common(p, dataset=False)
    p.add_argument("--noise", dest="synth_noise", type=float, help="label noise rate")
    p.add_argument("--distractors", dest="synth_distractors", type=int,
                   help="number of distractor relations")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("search", help="run the alternating super-net search")
    _add_common(p)
    p.add_argument("--mode", dest="search_mode",
                   choices=["partial", "one_path", "full"], help="sampling mode")
    p.add_argument("--epochs", dest="search_epochs", type=int, help="search epochs")
    p.add_argument("--p", dest="search_p", type=int,
                   help="sampling denominator (keep ceil(K/p) candidates)")
    p.add_argument("--depth", dest="search_depth", type=int, help="hyper-node count")
    p.add_argument("--hidden", dest="search_hidden", type=int, help="state width")
    p.add_argument("--runs", dest="search_runs", type=int, help="repeated runs")
    p.set_defaults(func=cmd_search)

    p = subs.add_parser("derive", help="discretize searched scores")
    _add_common(p, dataset=False)
    p.add_argument("--alpha", help="alpha.json to derive from")
    p.add_argument("--search-out", dest="search_out",
                   help="search output directory (uses its best run)")
    p.add_argument("--lambda-seq", dest="lambda_seq", type=float,
                   help="retention factor for sequential edges")
    p.add_argument("--lambda-res", dest="lambda_res", type=float,
                   help="retention factor for skip edges")
    p.add_argument("--single-path", action="store_true",
                   help="keep only the strongest candidate per edge")
    p.set_defaults(func=cmd_derive)

    p = subs.add_parser("train", help="retrain a derived architecture once")
    _add_common(p)
    p.add_argument("--arch", help="architecture.json (default: <out>/architecture.json)")
    p.add_argument("--epochs", dest="train_epochs", type=int, help="training epochs")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="repeated retraining evaluation")
    _add_common(p)
    p.add_argument("--arch", help="architecture.json (default: <out>/architecture.json)")
    p.add_argument("--epochs", dest="train_epochs", type=int, help="training epochs")
    p.add_argument("--eval-seeds", dest="train_eval_seeds", type=int,
                   help="number of training seeds")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("bench-stability", help="seed-stability sweep over modes")
    _add_common(p)
    p.add_argument("--seeds", dest="bench_seeds", help="seed list/range, e.g. 0-9")
    p.add_argument("--steps", dest="bench_steps", help="depth list, e.g. 2,3,4")
    p.add_argument("--modes", dest="bench_modes", help="modes, e.g. partial,one_path")
    p.add_argument("--train-seeds", dest="bench_train_seeds", type=int,
                   help="retrainings per cell")
    p.add_argument("--workers", dest="bench_workers", type=int, help="parallel workers")
    p.set_defaults(func=cmd_bench_stability)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MultigraphError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
