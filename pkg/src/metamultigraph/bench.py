"""Seed-stability benchmark: search -> derive -> repeated retrain per cell.

One cell is a (mode, steps, seed) triple: a single search run at that
seed/depth, derivation with the configured retention factors, then a few
retrainings whose test metrics are averaged. Failures (for example a
diverging one-path run) are captured as ``error:<CODE>`` rows instead of
aborting the sweep. Rows come back in deterministic (mode, steps, seed)
order regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .derive import DeriveConfig, derive_multigraph
from .errors import ConfigError, MultigraphError
from .graphs import HinGraph, SplitSpec
from .search import SearchConfig, run_search
from .targetnet import (
    build_target,
    evaluate_auc,
    evaluate_classification,
    train_target,
)
from .validation import check_positive_int

import numpy as np


@dataclass
class BenchRow:
    mode: str
    seed: int
    steps: int
    status: str
    metric_mean: float | None
    metric_std: float | None


@dataclass
class TrainParams:
    """Retraining knobs used by the bench and the CLI."""

    hidden: int = 64
    epochs: int | None = None
    lr: float = 0.01
    weight_decay: float = 5e-4
    patience: int = 10
    transform: bool | None = None


def _bench_cell(payload) -> BenchRow:
    (graph, splits, base, derive_cfg, train, mode, steps, seed, train_seeds) = payload
    cfg = replace(base, mode=mode, depth=steps, seed=seed, runs=1)
    try:
        outcome = run_search(cfg, graph, splits)
        arch = derive_multigraph(outcome.snapshot, derive_cfg)
        values = []
        for train_seed in range(train_seeds):
            net = build_target(
                arch, graph, train.hidden, seed=train_seed, task=splits.task,
                transform=train.transform, pair_relation=splits.pair_relation,
            )
            train_target(
                net, graph, splits, epochs=train.epochs, lr=train.lr,
                weight_decay=train.weight_decay, patience=train.patience,
            )
            if splits.task == "classification":
                macro, _ = evaluate_classification(net, graph, splits.test)
                values.append(macro)
            else:
                values.append(evaluate_auc(net, graph, splits.test))
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return BenchRow(mode, seed, steps, "ok", mean, std)
    except MultigraphError as exc:
        return BenchRow(mode, seed, steps, f"error:{exc.code}", None, None)


def run_stability_bench(
    graph: HinGraph,
    splits: SplitSpec,
    base: SearchConfig,
    derive_cfg: DeriveConfig,
    train: TrainParams,
    seeds: list[int],
    steps: list[int],
    modes: list[str] = ("partial", "one_path"),
    train_seeds: int = 3,
    workers: int = 1,
) -> list[BenchRow]:
    if not seeds or not steps or not modes:
        raise ConfigError("bench needs at least one seed, step count, and mode")
    check_positive_int(train_seeds, "train_seeds")
    check_positive_int(workers, "workers")
    payloads = [
        (graph, splits, base, derive_cfg, train, mode, s, seed, train_seeds)
        for mode in modes
        for s in steps
        for seed in seeds
    ]
    if workers == 1:
        return [_bench_cell(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_bench_cell, payloads))
