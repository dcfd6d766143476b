"""Shared builders and independent oracles used across the test modules."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import sparse

from metamultigraph import (
    HinGraph,
    MetaMultigraph,
    PlantedTruth,
    Relation,
    SplitSpec,
    build_recommendation_splits,
    edge_pairs,
)

# Score learning rate used by the calibrated end-to-end protocols. The short
# runs in this suite need faster score movement than the library default.
PROTOCOL_LR = dict(lr_omega=0.01, lr_alpha=0.05)


def toy_hin(seed: int) -> HinGraph:
    """Random heterogeneous graph with at most 30 nodes and 3 relations.

    Node type A always carries labels so classification batches exist, and
    every class index below the drawn class count appears at least once.
    """
    rng = np.random.default_rng(seed)
    names = ["A", "B", "C"][: int(rng.integers(2, 4))]
    counts = {t: int(rng.integers(3, 9)) for t in names}
    pairs = [(s, d) for s in names for d in names if s != d]
    n_rel = min(int(rng.integers(1, 4)), len(pairs))
    relations = {}
    for k in rng.choice(len(pairs), size=n_rel, replace=False):
        s, d = pairs[int(k)]
        mask = rng.random((counts[s], counts[d])) < 0.4
        if not mask.any():
            mask[0, 0] = True
        name = f"{s}{d}"
        relations[name] = Relation(name, s, d, sparse.csr_matrix(mask.astype(np.float64)))
    features = {}
    if rng.random() < 0.7:
        features["A"] = rng.normal(size=(counts["A"], int(rng.integers(2, 5))))
    n_classes = int(rng.integers(2, 4))
    labels = rng.integers(0, n_classes, size=counts["A"])
    for c in range(n_classes):
        labels[c % counts["A"]] = c
    return HinGraph(counts, relations, features, labels, "A")


def splits_for(graph: HinGraph) -> SplitSpec:
    """Deterministic contiguous train/val/test split over the labeled type."""
    n = int(graph.labels.size)
    ids = np.arange(n)
    if n >= 5:
        a, b = int(0.6 * n), int(0.8 * n)
    else:
        a, b = n - 2, n - 1
    return SplitSpec("classification", ids[:a], ids[a:b], ids[b:])


def rec_dataset(seed: int = 0, n_users: int = 15, n_items: int = 15, per_user: int = 6):
    """Small bipartite rating table turned into a link-scoring dataset."""
    rng = np.random.default_rng(seed)
    rows = []
    for u in range(n_users):
        for it in rng.choice(n_items, size=per_user, replace=False):
            rows.append([u, int(it), int(rng.integers(1, 6))])
    ratings = np.asarray(rows)
    edges, splits = build_recommendation_splits(ratings, seed=seed, pair_relation="UI")
    adj = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n_users, n_items)
    ).tocsr()
    graph = HinGraph({"I": n_items, "U": n_users}, {"UI": Relation("UI", "U", "I", adj)})
    splits.validate(graph)
    return graph, splits


def truth_architecture(truth: PlantedTruth) -> MetaMultigraph:
    """Discrete architecture that keeps exactly the planted relations."""
    retained = {}
    strengths = {}
    for e in edge_pairs(truth.depth):
        names = truth.required.get(e, ("zero",))
        retained[e] = tuple(names)
        strengths[e] = tuple(1.0 for _ in names)
    return MetaMultigraph(
        depth=truth.depth,
        retained=retained,
        strengths=strengths,
        lambda_seq=1.0,
        lambda_res=1.0,
    )


def f1_oracle(y_true, y_pred) -> tuple[float, float]:
    """Macro and micro F1 recomputed from an explicit confusion matrix."""
    y_true = np.asarray(y_true).reshape(-1)
    y_pred = np.asarray(y_pred).reshape(-1)
    classes = np.union1d(y_true, y_pred)
    index = {c: i for i, c in enumerate(classes)}
    conf = np.zeros((classes.size, classes.size), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        conf[index[t], index[p]] += 1
    per_class = np.empty(classes.size, dtype=np.float64)
    tp_sum = fp_sum = fn_sum = 0
    for i in range(classes.size):
        tp = int(conf[i, i])
        fp = int(conf[:, i].sum() - tp)
        fn = int(conf[i, :].sum() - tp)
        denom = 2 * tp + fp + fn
        per_class[i] = (2.0 * tp / denom) if denom else 0.0
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn
    micro_denom = 2 * tp_sum + fp_sum + fn_sum
    micro = (2.0 * tp_sum / micro_denom) if micro_denom else 0.0
    return float(per_class.mean()), float(micro)


def auc_oracle(scores, labels) -> float:
    """Exhaustive positive/negative pair comparison, ties worth one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        wins += float(np.sum(p > neg)) + 0.5 * float(np.sum(p == neg))
    return wins / (pos.size * neg.size)


def walk_label_oracle(graph: HinGraph, truth: PlantedTruth) -> np.ndarray:
    """Recompute planted labels by explicit neighbor traversal.

    For every target node and every chain, walk all realized paths along
    the chain relations, count arrivals per hidden group (read off the
    terminal one-hot features), and take the argmax. Chains combine in
    order as mixed-radix digits.
    """
    n = graph.node_counts[truth.target_type]
    groups = None
    bits = np.zeros((n, len(truth.chains)), dtype=np.int64)
    for c, chain in enumerate(truth.chains):
        terminal = graph.relations[chain[-1]].dst
        feat = np.asarray(graph.features[terminal])
        term_group = feat.argmax(axis=1)
        groups = feat.shape[1]
        adjs = [graph.relations[name].adjacency for name in chain]
        for node in range(n):
            counts = np.zeros(groups)
            frontier = [node]
            for adj in adjs:
                nxt = []
                for idx in frontier:
                    nxt.extend(adj.indices[adj.indptr[idx]: adj.indptr[idx + 1]])
                frontier = nxt
            for idx in frontier:
                counts[term_group[idx]] += 1
            bits[node, c] = int(np.argmax(counts))
    labels = np.zeros(n, dtype=np.int64)
    for c in range(len(truth.chains)):
        labels = labels * groups + bits[:, c]
    return labels


def write_ini(path, sections: dict) -> Path:
    lines = []
    for name, kv in sections.items():
        lines.append(f"[{name}]")
        for key, value in kv.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    path = Path(path)
    path.write_text("\n".join(lines))
    return path
