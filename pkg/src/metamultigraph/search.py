"""Alternating bilevel search over the relaxed network.

One epoch is one full-batch iteration: draw gate masks, update the network
weights on the training loss, redraw gate masks, update the edge scores on
the validation loss (first-order, no unrolling). Edge scores that were
masked in the second draw receive no update at all. Three modes:

    partial   keep ceil(K / p) candidates per edge, drawn uniformly
    one_path  keep exactly one candidate per edge
    full      no sampling; every candidate participates in both phases

After the epoch's updates, the full (ungated) forward is scored on the
validation split; that final-epoch score selects among repeated runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import Tape
from .derive import DeriveConfig, MetaMultigraph, derive_multigraph, derive_single_path
from .errors import ConfigError, DivergenceError
from .graphs import HinGraph, SplitSpec
from .optim import AdamState, adam_step
from .supernet import (
    AlphaSnapshot,
    SuperNet,
    build_supernet,
    edge_key,
    forward_full,
    forward_partial,
    sample_gates,
    single_gates,
)
from .tasks import loss_ref, metric_from_refs, prepare_batches
from .validation import check_fitted, check_mode, check_positive_int, check_seed, check_task

LOSS_CEILING = 1e6


@dataclass
class SearchConfig:
    """Hyper-parameters of one search run (seed offsets select repeats)."""

    mode: str = "partial"
    epochs: int = 30
    p: int = 2
    lr_omega: float = 0.01
    lr_alpha: float = 0.003
    weight_decay: float = 5e-4
    depth: int = 4
    hidden: int = 64
    seed: int = 0
    runs: int = 3
    task: str = "classification"
    transform: bool | None = None
    biased_one_path: bool = False
    select_by: str = "metric"

    def __post_init__(self) -> None:
        check_mode(self.mode)
        check_task(self.task)
        check_seed(self.seed)
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 0:
            raise ConfigError(f"epochs must be a non-negative integer, got {self.epochs!r}")
        check_positive_int(self.p, "p")
        check_positive_int(self.depth, "depth")
        check_positive_int(self.hidden, "hidden")
        check_positive_int(self.runs, "runs")
        for name in ("lr_omega", "lr_alpha"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay!r}")
        if self.select_by not in ("metric", "loss"):
            raise ConfigError(f"select_by must be 'metric' or 'loss', got {self.select_by!r}")


@dataclass
class SearchOutcome:
    """Result of one search run."""

    snapshot: AlphaSnapshot
    seed: int
    mode: str
    history: list[dict]
    val_metric: float
    val_loss: float
    selection_score: float


@dataclass
class SearchState:
    """Mutable state threaded through :func:`search_step`."""

    net: SuperNet
    cfg: SearchConfig
    batches: dict[str, dict]
    omega_state: AdamState
    alpha_state: AdamState
    epoch: int = 0
    history: list[dict] = field(default_factory=list)


def full_metric(net: SuperNet, batch: dict, task: str) -> float:
    """Task metric of the ungated forward on one prepared batch."""
    tape = Tape()
    refs = forward_full(net, tape)
    return metric_from_refs(tape, refs, batch, task)


def _phase_rng(seed: int, epoch: int, phase: int) -> np.random.Generator:
    """One stream per (seed, epoch, phase); edges consume it in canonical order."""
    return np.random.default_rng(np.random.SeedSequence((seed, epoch, phase)))


def _draw_gates(net: SuperNet, cfg: SearchConfig, epoch: int, phase: int):
    if cfg.mode == "full":
        return None
    rng = _phase_rng(cfg.seed, epoch, phase)
    if cfg.mode == "partial":
        return sample_gates(net, cfg.p, rng)
    return single_gates(net, rng, biased=cfg.biased_one_path)


def _check_loss(value: float, what: str, epoch: int, cfg: SearchConfig) -> float:
    if not np.isfinite(value) or value > LOSS_CEILING:
        raise DivergenceError(
            f"{what} loss diverged at epoch {epoch} "
            f"(mode={cfg.mode}, seed={cfg.seed}, value={value!r})",
            epoch=epoch,
        )
    return float(value)


def search_step(state: SearchState) -> SearchState:
    """One epoch: weight update on train loss, then score update on val loss."""
    net, cfg = state.net, state.cfg
    epoch = state.epoch + 1

    gates = _draw_gates(net, cfg, epoch, 0)
    tape = Tape()
    refs = forward_full(net, tape) if gates is None else forward_partial(net, tape, gates)
    loss = loss_ref(tape, refs, state.batches["train"], cfg.task)
    train_loss = _check_loss(float(tape.value(loss)), "training", epoch, cfg)
    tape.backward(loss)
    omega_grads = {k: tape.grad(refs.omega[k]) for k in net.omega}
    adam_step(state.omega_state, net.omega, omega_grads)

    gates2 = _draw_gates(net, cfg, epoch, 1)
    tape2 = Tape()
    refs2 = forward_full(net, tape2) if gates2 is None else forward_partial(net, tape2, gates2)
    vloss = loss_ref(tape2, refs2, state.batches["val"], cfg.task)
    val_loss = _check_loss(float(tape2.value(vloss)), "validation", epoch, cfg)
    tape2.backward(vloss)
    alpha_grads = {edge_key(e): tape2.grad(refs2.alpha[e]) for e in net.edges}
    active = None
    if gates2 is not None:
        active = {edge_key(e): gates2[e].astype(bool) for e in net.edges}
    adam_step(state.alpha_state, net.alpha, alpha_grads, active=active)

    val_metric = full_metric(net, state.batches["val"], cfg.task)
    state.epoch = epoch
    state.history.append(
        {
            "epoch": epoch,
            "train_loss": train_loss,
            "val_loss": val_loss,
            "val_metric": val_metric,
        }
    )
    return state


def init_search(cfg: SearchConfig, graph: HinGraph, splits: SplitSpec) -> SearchState:
    if splits.task != cfg.task:
        raise ConfigError(f"splits are for task {splits.task!r}, config says {cfg.task!r}")
    splits.validate(graph)
    net = build_supernet(
        graph, cfg.depth, cfg.hidden, seed=cfg.seed, task=cfg.task, transform=cfg.transform
    )
    omega_state = AdamState.for_params(
        net.omega, lr=cfg.lr_omega, weight_decay=cfg.weight_decay
    )
    alpha_state = AdamState.for_params(net.alpha, lr=cfg.lr_alpha)
    return SearchState(
        net=net,
        cfg=cfg,
        batches=prepare_batches(graph, splits),
        omega_state=omega_state,
        alpha_state=alpha_state,
    )


def run_search(cfg: SearchConfig, graph: HinGraph, splits: SplitSpec) -> SearchOutcome:
    """Run one seeded search to completion and score it for selection."""
    state = init_search(cfg, graph, splits)
    for _ in range(cfg.epochs):
        search_step(state)
    if state.history:
        val_metric = state.history[-1]["val_metric"]
        val_loss = state.history[-1]["val_loss"]
    else:
        val_metric = full_metric(state.net, state.batches["val"], cfg.task)
        val_loss = float("nan")
    selection = val_metric if cfg.select_by == "metric" else -val_loss
    return SearchOutcome(
        snapshot=state.net.snapshot_alpha(),
        seed=cfg.seed,
        mode=cfg.mode,
        history=state.history,
        val_metric=val_metric,
        val_loss=val_loss,
        selection_score=selection,
    )


def multi_run_select(outcomes: list[SearchOutcome]) -> SearchOutcome:
    """Best outcome by selection score; ties go to the lower seed."""
    if not outcomes:
        raise ConfigError("multi_run_select needs at least one outcome")
    return min(outcomes, key=lambda o: (-o.selection_score, o.seed))


def run_search_multi(
    cfg: SearchConfig, graph: HinGraph, splits: SplitSpec
) -> tuple[SearchOutcome, list[SearchOutcome]]:
    """Run ``cfg.runs`` searches at consecutive seeds; return (best, all)."""
    outcomes = [
        run_search(replace(cfg, seed=cfg.seed + k), graph, splits) for k in range(cfg.runs)
    ]
    return multi_run_select(outcomes), outcomes


class MultigraphSearch(BaseEstimator):
    """Estimator facade: fit() searches, derive() discretizes.

    Parameters mirror :class:`SearchConfig` plus the two retention factors
    used by :meth:`derive`. Fitted attributes: ``snapshot_`` (best run's
    edge scores), ``outcomes_``, ``best_seed_``, ``val_metric_``,
    ``history_``.
    """

    def __init__(
        self,
        mode: str = "partial",
        epochs: int = 30,
        sample_denominator: int = 2,
        depth: int = 4,
        hidden: int = 64,
        lr_weights: float = 0.01,
        lr_scores: float = 0.003,
        weight_decay: float = 5e-4,
        runs: int = 3,
        task: str = "classification",
        transform: bool | None = None,
        biased_one_path: bool = False,
        select_by: str = "metric",
        lambda_seq: float = 0.9,
        lambda_res: float = 0.9,
        seed: int = 0,
    ) -> None:
        self.mode = mode
        self.epochs = epochs
        self.sample_denominator = sample_denominator
        self.depth = depth
        self.hidden = hidden
        self.lr_weights = lr_weights
        self.lr_scores = lr_scores
        self.weight_decay = weight_decay
        self.runs = runs
        self.task = task
        self.transform = transform
        self.biased_one_path = biased_one_path
        self.select_by = select_by
        self.lambda_seq = lambda_seq
        self.lambda_res = lambda_res
        self.seed = seed

    def _config(self) -> SearchConfig:
        return SearchConfig(
            mode=self.mode,
            epochs=self.epochs,
            p=self.sample_denominator,
            lr_omega=self.lr_weights,
            lr_alpha=self.lr_scores,
            weight_decay=self.weight_decay,
            depth=self.depth,
            hidden=self.hidden,
            seed=self.seed,
            runs=self.runs,
            task=self.task,
            transform=self.transform,
            biased_one_path=self.biased_one_path,
            select_by=self.select_by,
        )

    def fit(self, graph: HinGraph, splits: SplitSpec) -> "MultigraphSearch":
        best, outcomes = run_search_multi(self._config(), graph, splits)
        self.snapshot_ = best.snapshot
        self.outcomes_ = outcomes
        self.best_seed_ = best.seed
        self.val_metric_ = best.val_metric
        self.history_ = best.history
        return self

    def derive(self) -> MetaMultigraph:
        check_fitted(self, ["snapshot_"])
        return derive_multigraph(
            self.snapshot_, DeriveConfig(self.lambda_seq, self.lambda_res)
        )

    def derive_single_path(self) -> MetaMultigraph:
        check_fitted(self, ["snapshot_"])
        return derive_single_path(self.snapshot_)
