"""Compact network induced by a derived meta multigraph, plus retraining.

The target network reuses the stacked-state layout of the search network
but carries no mixing weights: each multi-edge contributes the plain
(unweighted) sum of its retained candidates, and edges that retained only
the no-op candidate are dropped entirely. Weights are re-initialized from
scratch (same families and init scheme as the search network) and trained
full-batch with early stopping on the validation metric; the best-val
checkpoint is what gets evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import Tape, softmax_probs
from .derive import MetaMultigraph
from .errors import ConfigError, DataError, DivergenceError
from .graphs import HinGraph, SplitSpec
from .metrics import auc_score, f1_scores
from .optim import AdamState, adam_step
from .supernet import (
    IDENTITY,
    ZERO,
    ForwardRefs,
    _block_operator,
    _placement,
    class_logits,
    init_weights,
    pair_scores,
    project_inputs,
)
from .tasks import metric_from_refs, prepare_batches, loss_ref
from .validation import (
    check_fitted,
    check_positive_int,
    check_seed,
    check_task,
)

LOSS_CEILING = 1e6


class TargetNet:
    """Discrete network bound to one graph and one derived architecture."""

    def __init__(
        self,
        arch: MetaMultigraph,
        graph: HinGraph,
        hidden: int,
        seed: int = 0,
        task: str = "classification",
        transform: bool | None = None,
        n_classes: int | None = None,
        pair_relation: str | None = None,
    ) -> None:
        check_task(task)
        check_positive_int(hidden, "hidden")
        check_seed(seed)
        missing = arch.relations_used() - set(graph.relations)
        if missing:
            raise DataError(
                f"architecture references unknown relations {sorted(missing)}"
            )
        self.arch = arch
        self.graph = graph
        self.depth = arch.depth
        self.hidden = hidden
        self.task = task
        self.transform = (task == "classification") if transform is None else bool(transform)
        if task == "classification":
            n_classes = graph.n_classes() if n_classes is None else n_classes
        self.n_classes = n_classes
        self.pair_relation = pair_relation
        self.operators = {
            name: _block_operator(graph, name) for name in sorted(arch.relations_used())
        }
        total = graph.total_nodes
        self.input_plan = [
            (t, graph.features.get(t), _placement(total, graph.offset(t), graph.node_counts[t]))
            for t in graph.type_order
        ]
        # per-edge retained candidates with the no-op dropped
        self.plan = {
            e: tuple(n for n in arch.retained[e] if n != ZERO)
            for e in arch.retained
        }
        self.init_seed = seed
        self.omega = self._fresh_weights(seed)

    def _fresh_weights(self, seed: int) -> dict[str, np.ndarray]:
        omega, _ = init_weights(
            self.graph, self.depth, self.hidden, self.task, self.transform,
            self.n_classes, seed,
        )
        return omega

    def reinit(self, seed: int) -> None:
        self.init_seed = check_seed(seed)
        self.omega = self._fresh_weights(seed)


def build_target(
    arch: MetaMultigraph,
    graph: HinGraph,
    hidden: int,
    seed: int = 0,
    task: str = "classification",
    transform: bool | None = None,
    n_classes: int | None = None,
    pair_relation: str | None = None,
) -> TargetNet:
    return TargetNet(arch, graph, hidden, seed, task, transform, n_classes, pair_relation)


def target_forward(
    net: TargetNet, tape: Tape, omega: dict[str, np.ndarray] | None = None
) -> ForwardRefs:
    """Unweighted-sum forward over the retained candidates."""
    omega = net.omega if omega is None else omega
    omega_refs = {k: tape.leaf(omega[k], k) for k in sorted(omega)}
    h0 = project_inputs(tape, net.input_plan, omega_refs)
    refs = ForwardRefs(h=[h0], omega=omega_refs)
    for j in range(1, net.depth + 1):
        msg = None
        for i in range(j):
            for name in net.plan.get((i, j), ()):
                base = refs.h[i] if name == IDENTITY else tape.spmm(net.operators[name], refs.h[i])
                msg = base if msg is None else tape.add(msg, base)
        if msg is None:
            msg = tape.zeros((net.graph.total_nodes, net.hidden))
        if net.transform:
            msg = tape.relu(tape.matmul(msg, omega_refs[f"node/{j}"]))
        refs.h.append(msg)
    return refs


@dataclass
class TrainResult:
    """Retraining trace; the network ends at the best-val checkpoint."""

    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_metric: float = float("nan")


def train_target(
    net: TargetNet,
    graph: HinGraph,
    splits: SplitSpec,
    epochs: int | None = None,
    lr: float = 0.01,
    weight_decay: float = 5e-4,
    patience: int = 10,
    seed: int | None = None,
) -> TrainResult:
    """Full-batch training with best-val checkpointing and early stopping.

    ``seed`` re-initializes the weights before training when given (the
    rest of the procedure is deterministic). ``epochs=0`` evaluates the
    initial weights and returns them as the checkpoint. Early stopping
    triggers after ``patience`` epochs without strict val improvement.
    """
    if splits.task != net.task:
        raise ConfigError(f"splits are for task {splits.task!r}, network is {net.task!r}")
    splits.validate(graph)
    if net.task == "recommendation" and net.pair_relation is None:
        net.pair_relation = splits.pair_relation
    if epochs is None:
        epochs = 100 if net.task == "classification" else 200
    if not isinstance(epochs, (int, np.integer)) or epochs < 0:
        raise ConfigError(f"epochs must be a non-negative integer, got {epochs!r}")
    check_positive_int(patience, "patience")
    if not (np.isfinite(lr) and lr > 0):
        raise ConfigError(f"lr must be positive, got {lr!r}")
    if seed is not None:
        net.reinit(seed)

    batches = prepare_batches(graph, splits)
    state = AdamState.for_params(net.omega, lr=lr, weight_decay=weight_decay)
    result = TrainResult()

    def val_metric() -> float:
        tape = Tape()
        refs = target_forward(net, tape)
        return metric_from_refs(tape, refs, batches["val"], net.task)

    best = val_metric()
    best_weights = {k: v.copy() for k, v in net.omega.items()}
    result.best_epoch = 0
    result.best_val_metric = best
    since_best = 0
    for epoch in range(1, epochs + 1):
        tape = Tape()
        refs = target_forward(net, tape)
        loss = loss_ref(tape, refs, batches["train"], net.task)
        train_loss = float(tape.value(loss))
        if not np.isfinite(train_loss) or train_loss > LOSS_CEILING:
            raise DivergenceError(
                f"target training loss diverged at epoch {epoch} (value={train_loss!r})",
                epoch=epoch,
            )
        tape.backward(loss)
        grads = {k: tape.grad(refs.omega[k]) for k in net.omega}
        adam_step(state, net.omega, grads)
        metric = val_metric()
        result.history.append(
            {"epoch": epoch, "train_loss": train_loss, "val_metric": metric}
        )
        if metric > best:
            best = metric
            best_weights = {k: v.copy() for k, v in net.omega.items()}
            result.best_epoch = epoch
            result.best_val_metric = best
            since_best = 0
        else:
            since_best += 1
            if since_best >= patience:
                break
    net.omega = best_weights
    return result


def evaluate_classification(
    net: TargetNet, graph: HinGraph, nodes: np.ndarray
) -> tuple[float, float]:
    """(macro-F1, micro-F1) on local node indices of the labeled type."""
    if net.task != "classification":
        raise ConfigError("evaluate_classification needs a classification network")
    if graph.labels is None:
        raise DataError("graph has no labels to evaluate against")
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    y = graph.labels[nodes]
    if np.any(y < 0):
        raise DataError("evaluation nodes include unlabeled nodes")
    preds = predict_classes(net, nodes)
    return f1_scores(y, preds)


def predict_classes(net: TargetNet, nodes: np.ndarray) -> np.ndarray:
    logits = predict_logits(net, nodes)
    return logits.argmax(axis=1)


def predict_logits(net: TargetNet, nodes: np.ndarray) -> np.ndarray:
    if net.task != "classification":
        raise ConfigError("class prediction needs a classification network")
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    rows = net.graph.global_indices(net.graph.label_type, nodes)
    tape = Tape()
    refs = target_forward(net, tape)
    return np.asarray(tape.value(class_logits(tape, refs, rows)))


def predict_pair_scores(
    net: TargetNet, pairs: np.ndarray, pair_relation: str | None = None
) -> np.ndarray:
    """Link scores for (source, target) local index pairs."""
    rel_name = pair_relation or net.pair_relation
    if rel_name is None:
        raise ConfigError("pair scoring needs a pair_relation")
    rel = net.graph.relations[rel_name]
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] < 2:
        raise ConfigError(f"pairs must have shape (n, >=2), got {pairs.shape}")
    rows_src = net.graph.global_indices(rel.src, pairs[:, 0])
    rows_dst = net.graph.global_indices(rel.dst, pairs[:, 1])
    tape = Tape()
    refs = target_forward(net, tape)
    return np.asarray(tape.value(pair_scores(tape, refs, rows_src, rows_dst)))


def evaluate_auc(
    net: TargetNet, graph: HinGraph, pairs: np.ndarray, pair_relation: str | None = None
) -> float:
    """AUC over (source, target, 0/1 label) triples. Needs both labels."""
    if net.task != "recommendation":
        raise ConfigError("evaluate_auc needs a recommendation network")
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 3:
        raise ConfigError(f"labeled pairs must have shape (n, 3), got {pairs.shape}")
    scores = predict_pair_scores(net, pairs[:, :2], pair_relation)
    return auc_score(scores, pairs[:, 2])


@dataclass
class EvalReport:
    """Aggregated repeated-retraining evaluation."""

    task: str
    seeds: list[int]
    per_seed: list[dict]
    mean: dict[str, float]
    std: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seeds": list(self.seeds),
            "per_seed": [dict(row) for row in self.per_seed],
            "mean": dict(self.mean),
            "std": dict(self.std),
        }


def repeat_eval(
    arch: MetaMultigraph,
    graph: HinGraph,
    splits: SplitSpec,
    n_seeds: int = 10,
    hidden: int = 64,
    epochs: int | None = None,
    lr: float = 0.01,
    weight_decay: float = 5e-4,
    patience: int = 10,
    transform: bool | None = None,
) -> EvalReport:
    """Retrain from scratch with seeds 0..n_seeds-1, evaluate on test.

    Reports per-seed metrics plus their mean and sample standard deviation
    (ddof=1; zero for a single seed).
    """
    check_positive_int(n_seeds, "n_seeds")
    per_seed: list[dict] = []
    for seed in range(n_seeds):
        net = build_target(
            arch, graph, hidden, seed=seed, task=splits.task, transform=transform,
            pair_relation=splits.pair_relation,
        )
        train_target(
            net, graph, splits, epochs=epochs, lr=lr,
            weight_decay=weight_decay, patience=patience,
        )
        if splits.task == "classification":
            macro, micro = evaluate_classification(net, graph, splits.test)
            per_seed.append({"seed": seed, "macro_f1": macro, "micro_f1": micro})
        else:
            auc = evaluate_auc(net, graph, splits.test)
            per_seed.append({"seed": seed, "auc": auc})
    names = [k for k in per_seed[0] if k != "seed"]
    mean = {k: float(np.mean([row[k] for row in per_seed])) for k in names}
    std = {
        k: float(np.std([row[k] for row in per_seed], ddof=1)) if n_seeds > 1 else 0.0
        for k in names
    }
    return EvalReport(
        task=splits.task,
        seeds=list(range(n_seeds)),
        per_seed=per_seed,
        mean=mean,
        std=std,
    )


class MultigraphClassifier(BaseEstimator):
    """Retrains a derived architecture for node classification.

    Fit binds the network to the graph (transductive); predict takes local
    node indices of the labeled type.
    """

    def __init__(
        self,
        architecture: MetaMultigraph | None = None,
        hidden: int = 64,
        epochs: int = 100,
        lr: float = 0.01,
        weight_decay: float = 5e-4,
        patience: int = 10,
        transform: bool | None = None,
        seed: int = 0,
    ) -> None:
        self.architecture = architecture
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.patience = patience
        self.transform = transform
        self.seed = seed

    def fit(self, graph: HinGraph, splits: SplitSpec) -> "MultigraphClassifier":
        if self.architecture is None:
            raise ConfigError("MultigraphClassifier needs an architecture")
        net = build_target(
            self.architecture, graph, self.hidden, seed=self.seed,
            task="classification", transform=self.transform,
        )
        self.result_ = train_target(
            net, graph, splits, epochs=self.epochs, lr=self.lr,
            weight_decay=self.weight_decay, patience=self.patience,
        )
        self.net_ = net
        return self

    def predict(self, nodes) -> np.ndarray:
        check_fitted(self, ["net_"])
        return predict_classes(self.net_, nodes)

    def predict_proba(self, nodes) -> np.ndarray:
        check_fitted(self, ["net_"])
        logits = predict_logits(self.net_, nodes)
        return np.vstack([softmax_probs(row) for row in logits])

    def evaluate(self, nodes) -> dict[str, float]:
        check_fitted(self, ["net_"])
        macro, micro = evaluate_classification(self.net_, self.net_.graph, nodes)
        return {"macro_f1": macro, "micro_f1": micro}


class MultigraphRecommender(BaseEstimator):
    """Retrains a derived architecture for user-item link scoring."""

    def __init__(
        self,
        architecture: MetaMultigraph | None = None,
        hidden: int = 64,
        epochs: int = 200,
        lr: float = 0.01,
        weight_decay: float = 5e-4,
        patience: int = 10,
        transform: bool | None = None,
        seed: int = 0,
    ) -> None:
        self.architecture = architecture
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.patience = patience
        self.transform = transform
        self.seed = seed

    def fit(self, graph: HinGraph, splits: SplitSpec) -> "MultigraphRecommender":
        if self.architecture is None:
            raise ConfigError("MultigraphRecommender needs an architecture")
        net = build_target(
            self.architecture, graph, self.hidden, seed=self.seed,
            task="recommendation", transform=self.transform,
            pair_relation=splits.pair_relation,
        )
        self.result_ = train_target(
            net, graph, splits, epochs=self.epochs, lr=self.lr,
            weight_decay=self.weight_decay, patience=self.patience,
        )
        self.net_ = net
        return self

    def predict(self, pairs) -> np.ndarray:
        check_fitted(self, ["net_"])
        return predict_pair_scores(self.net_, pairs)

    def evaluate(self, labeled_pairs) -> dict[str, float]:
        check_fitted(self, ["net_"])
        auc = evaluate_auc(self.net_, self.net_.graph, np.asarray(labeled_pairs))
        return {"auc": auc}
