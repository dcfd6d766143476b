"""Relaxed search network over a DAG of hyper-nodes.

The network stacks all node types into one state matrix of shape
(total_nodes, hidden). Hyper-node 0 is the projected input; hyper-node j
aggregates messages from every earlier hyper-node i over a multi-edge
(i, j). Each multi-edge carries one candidate per relation plus an
``identity`` pass-through and a ``zero`` (no-op) candidate; a softmax over
the edge's score vector mixes the candidates. Relation candidates are
sparse total x total operators that write the mean of destination-type
neighbor states into source-type rows, leaving other rows zero.

Partial evaluation gates each edge with a 0/1 mask over candidates: masked
candidates are skipped in the sum while the softmax stays normalized over
the full candidate set. With an all-ones mask the gated forward is
bit-identical to the ungated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .autodiff import Ref, Tape, softmax_probs
from .errors import ConfigError, ShapeError
from .graphs import HinGraph, normalized_adjacency
from .validation import check_positive_int, check_seed, check_task

IDENTITY = "identity"
ZERO = "zero"

# scale of the uniform noise added to zero-initialized edge scores
ALPHA_NOISE = 1e-3

Edge = tuple[int, int]


def edge_pairs(depth: int) -> list[Edge]:
    """Canonical multi-edge order: grouped by target, source ascending."""
    check_positive_int(depth, "depth")
    return [(i, j) for j in range(1, depth + 1) for i in range(j)]


def edge_key(edge: Edge) -> str:
    return f"{edge[0]}:{edge[1]}"


def candidate_names(graph: HinGraph) -> tuple[str, ...]:
    return tuple(sorted(graph.relations)) + (IDENTITY, ZERO)


@dataclass
class CandidatePath:
    """One selectable message function on a multi-edge."""

    name: str
    kind: str  # "relation" | "identity" | "zero"
    operator: sparse.csr_matrix | None = None


@dataclass
class AlphaSnapshot:
    """Searched edge scores, detached from any network."""

    depth: int
    candidates: tuple[str, ...]
    alphas: dict[Edge, np.ndarray]

    def __post_init__(self) -> None:
        expected = set(edge_pairs(self.depth))
        if set(self.alphas) != expected:
            raise ShapeError(
                f"alpha snapshot covers edges {sorted(self.alphas)}, expected "
                f"{sorted(expected)}"
            )
        k = len(self.candidates)
        for e, vec in self.alphas.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (k,):
                raise ShapeError(
                    f"alpha for edge {e} has shape {vec.shape}, expected ({k},)"
                )
            self.alphas[e] = vec

    def strengths(self, edge: Edge) -> np.ndarray:
        return path_strengths(self.alphas[edge])


def path_strengths(alpha: np.ndarray) -> np.ndarray:
    """Softmax mixing weights of one edge; positive and summing to 1."""
    return softmax_probs(alpha)


def _placement(total: int, offset: int, count: int) -> sparse.csr_matrix:
    rows = np.arange(offset, offset + count)
    cols = np.arange(count)
    data = np.ones(count, dtype=np.float64)
    return sparse.coo_matrix((data, (rows, cols)), shape=(total, count)).tocsr()


def _block_operator(graph: HinGraph, name: str) -> sparse.csr_matrix:
    """Embed a row-normalized relation into the stacked node space."""
    rel = graph.relations[name]
    norm = normalized_adjacency(graph, name).tocoo()
    total = graph.total_nodes
    rows = norm.row + graph.offset(rel.src)
    cols = norm.col + graph.offset(rel.dst)
    return sparse.coo_matrix((norm.data, (rows, cols)), shape=(total, total)).tocsr()


def init_weights(
    graph: HinGraph,
    depth: int,
    hidden: int,
    task: str,
    transform: bool,
    n_classes: int | None,
    seed: int,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Seeded init of weight and edge-score families in a fixed draw order.

    Order: input projections over sorted types, per-level transforms for
    j = 1..depth, the classification head, then edge scores (zeros plus
    uniform noise of scale ALPHA_NOISE) in canonical edge order.
    """
    rng = np.random.default_rng(seed)
    omega: dict[str, np.ndarray] = {}
    for t in graph.type_order:
        raw = graph.feature_dim(t)
        bound = 1.0 / math.sqrt(raw)
        omega[f"in/{t}"] = rng.uniform(-bound, bound, size=(raw, hidden))
    if transform:
        bound = 1.0 / math.sqrt(hidden)
        for j in range(1, depth + 1):
            omega[f"node/{j}"] = rng.uniform(-bound, bound, size=(hidden, hidden))
    if task == "classification":
        if n_classes is None or n_classes < 2:
            raise ConfigError(f"classification needs n_classes >= 2, got {n_classes}")
        bound = 1.0 / math.sqrt(hidden)
        omega["head"] = rng.uniform(-bound, bound, size=(hidden, n_classes))
    k = len(candidate_names(graph))
    alpha = {
        edge_key(e): ALPHA_NOISE * rng.uniform(-1.0, 1.0, size=k)
        for e in edge_pairs(depth)
    }
    return omega, alpha


class SuperNet:
    """Searchable relaxed network bound to one graph."""

    def __init__(
        self,
        graph: HinGraph,
        depth: int,
        hidden: int,
        seed: int = 0,
        task: str = "classification",
        transform: bool | None = None,
        n_classes: int | None = None,
    ) -> None:
        check_task(task)
        check_positive_int(depth, "depth")
        check_positive_int(hidden, "hidden")
        check_seed(seed)
        self.graph = graph
        self.depth = depth
        self.hidden = hidden
        self.task = task
        self.transform = (task == "classification") if transform is None else bool(transform)
        if task == "classification":
            n_classes = graph.n_classes() if n_classes is None else n_classes
        self.n_classes = n_classes
        self.edges = edge_pairs(depth)
        names = candidate_names(graph)
        self.candidates = [
            CandidatePath(n, "relation", _block_operator(graph, n)) for n in names[:-2]
        ]
        self.candidates.append(CandidatePath(IDENTITY, "identity"))
        self.candidates.append(CandidatePath(ZERO, "zero"))
        self.cand_names = names
        total = graph.total_nodes
        self.input_plan = []
        for t in graph.type_order:
            feat = graph.features.get(t)
            place = _placement(total, graph.offset(t), graph.node_counts[t])
            self.input_plan.append((t, feat, place))
        self.omega, self.alpha = init_weights(
            graph, depth, hidden, task, self.transform, n_classes, seed
        )

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    def snapshot_alpha(self) -> AlphaSnapshot:
        return AlphaSnapshot(
            depth=self.depth,
            candidates=self.cand_names,
            alphas={e: self.alpha[edge_key(e)].copy() for e in self.edges},
        )


def build_supernet(
    graph: HinGraph,
    depth: int,
    hidden: int,
    seed: int = 0,
    task: str = "classification",
    transform: bool | None = None,
    n_classes: int | None = None,
) -> SuperNet:
    return SuperNet(graph, depth, hidden, seed, task, transform, n_classes)


# -- gate sampling -----------------------------------------------------------


def sample_count(n_candidates: int, p: int) -> int:
    """Number of active candidates per edge: ceil(n_candidates / p)."""
    check_positive_int(n_candidates, "n_candidates")
    check_positive_int(p, "p")
    return -(-n_candidates // p)


def _edge_rngs(
    net: SuperNet, rng: np.random.Generator | Sequence[np.random.Generator]
) -> list[np.random.Generator]:
    """One generator per edge; a single generator is shared sequentially."""
    if isinstance(rng, np.random.Generator):
        return [rng] * len(net.edges)
    rngs = list(rng)
    if len(rngs) != len(net.edges):
        raise ShapeError(f"expected {len(net.edges)} generators, got {len(rngs)}")
    return rngs


def sample_gates(
    net: SuperNet,
    p: int,
    rng: np.random.Generator | Sequence[np.random.Generator],
) -> dict[Edge, np.ndarray]:
    """Uniform without-replacement gate masks, one per edge in canonical order."""
    k = sample_count(net.n_candidates, p)
    gates: dict[Edge, np.ndarray] = {}
    for e, r in zip(net.edges, _edge_rngs(net, rng)):
        idx = r.choice(net.n_candidates, size=k, replace=False)
        mask = np.zeros(net.n_candidates, dtype=np.int64)
        mask[idx] = 1
        gates[e] = mask
    return gates


def single_gates(
    net: SuperNet,
    rng: np.random.Generator | Sequence[np.random.Generator],
    biased: bool = False,
) -> dict[Edge, np.ndarray]:
    """One active candidate per edge; optionally strength-biased.

    The uniform branch draws exactly like ``sample_gates`` with an active
    count of one, so the two coincide stream-for-stream.
    """
    gates: dict[Edge, np.ndarray] = {}
    for e, r in zip(net.edges, _edge_rngs(net, rng)):
        if biased:
            probs = path_strengths(net.alpha[edge_key(e)])
            idx = r.choice(net.n_candidates, p=probs)
        else:
            idx = r.choice(net.n_candidates, size=1, replace=False)
        mask = np.zeros(net.n_candidates, dtype=np.int64)
        mask[idx] = 1
        gates[e] = mask
    return gates


def ones_gates(net: SuperNet) -> dict[Edge, np.ndarray]:
    return {e: np.ones(net.n_candidates, dtype=np.int64) for e in net.edges}


# -- forward passes ----------------------------------------------------------


@dataclass
class ForwardRefs:
    """Tape refs produced by one forward pass."""

    h: list[Ref]
    omega: dict[str, Ref]
    alpha: dict[Edge, Ref] = field(default_factory=dict)
    strengths: dict[Edge, Ref] = field(default_factory=dict)


def project_inputs(tape: Tape, input_plan, omega_refs: dict[str, Ref]) -> Ref:
    """Stacked hyper-node 0: per-type features through per-type projections."""
    h0: Ref | None = None
    for t, feat, place in input_plan:
        w = omega_refs[f"in/{t}"]
        if feat is None:
            term = tape.spmm(place, w)
        else:
            term = tape.spmm(place, tape.matmul(tape.leaf(feat, f"features/{t}"), w))
        h0 = term if h0 is None else tape.add(h0, term)
    return h0


def _check_gates(net: SuperNet, gates: dict[Edge, np.ndarray]) -> None:
    if set(gates) != set(net.edges):
        raise ShapeError(
            f"gate masks cover edges {sorted(gates)}, expected {sorted(net.edges)}"
        )
    for e, m in gates.items():
        m = np.asarray(m)
        if m.shape != (net.n_candidates,):
            raise ShapeError(
                f"gate mask for edge {e} has shape {m.shape}, expected "
                f"({net.n_candidates},)"
            )


def _forward(
    net: SuperNet,
    tape: Tape,
    gates: dict[Edge, np.ndarray] | None,
    unit_strengths: bool,
    input_order: str,
    omega: dict[str, np.ndarray] | None,
    alpha: dict[str, np.ndarray] | None,
) -> ForwardRefs:
    if input_order not in ("asc", "desc"):
        raise ConfigError(f"input_order must be 'asc' or 'desc', got {input_order!r}")
    if gates is not None:
        _check_gates(net, gates)
    omega = net.omega if omega is None else omega
    alpha = net.alpha if alpha is None else alpha
    omega_refs = {k: tape.leaf(omega[k], k) for k in sorted(omega)}
    alpha_refs = {e: tape.leaf(alpha[edge_key(e)], f"alpha/{edge_key(e)}") for e in net.edges}
    h0 = project_inputs(tape, net.input_plan, omega_refs)
    refs = ForwardRefs(h=[h0], omega=omega_refs, alpha=alpha_refs)

    for j in range(1, net.depth + 1):
        msg: Ref | None = None
        sources = range(j) if input_order == "asc" else range(j - 1, -1, -1)
        for i in sources:
            e = (i, j)
            mask = None if gates is None else gates[e]
            sref = tape.softmax_vector(alpha_refs[e], mask)
            refs.strengths[e] = sref
            for k, cand in enumerate(net.candidates):
                if cand.kind == "zero":
                    continue
                if mask is not None and mask[k] == 0:
                    continue
                base = refs.h[i] if cand.kind == "identity" else tape.spmm(cand.operator, refs.h[i])
                term = base if unit_strengths else tape.scale(base, tape.pick(sref, k))
                msg = term if msg is None else tape.add(msg, term)
        if msg is None:
            msg = tape.zeros((net.graph.total_nodes, net.hidden))
        if net.transform:
            msg = tape.relu(tape.matmul(msg, omega_refs[f"node/{j}"]))
        refs.h.append(msg)
    return refs


def forward_full(
    net: SuperNet,
    tape: Tape,
    unit_strengths: bool = False,
    input_order: str = "asc",
    omega: dict[str, np.ndarray] | None = None,
    alpha: dict[str, np.ndarray] | None = None,
) -> ForwardRefs:
    """Mix every candidate on every edge (no gating)."""
    return _forward(net, tape, None, unit_strengths, input_order, omega, alpha)


def forward_partial(
    net: SuperNet,
    tape: Tape,
    gates: dict[Edge, np.ndarray],
    unit_strengths: bool = False,
    input_order: str = "asc",
    omega: dict[str, np.ndarray] | None = None,
    alpha: dict[str, np.ndarray] | None = None,
) -> ForwardRefs:
    """Sum only gate-active candidates; softmax stays over the full set."""
    return _forward(net, tape, gates, unit_strengths, input_order, omega, alpha)


# -- heads -------------------------------------------------------------------


def class_logits(tape: Tape, refs: ForwardRefs, rows_global: np.ndarray) -> Ref:
    """Linear head over final-state rows (no bias)."""
    if "head" not in refs.omega:
        raise ConfigError("network has no classification head")
    picked = tape.row_gather(refs.h[-1], np.asarray(rows_global, dtype=np.int64))
    return tape.matmul(picked, refs.omega["head"])


def pair_scores(
    tape: Tape, refs: ForwardRefs, rows_src: np.ndarray, rows_dst: np.ndarray
) -> Ref:
    """Dot-product link scores between two sets of final-state rows."""
    a = tape.row_gather(refs.h[-1], np.asarray(rows_src, dtype=np.int64))
    b = tape.row_gather(refs.h[-1], np.asarray(rows_dst, dtype=np.int64))
    return tape.rowwise_dot(a, b)
