"""Synthetic heterogeneous graphs with planted relation chains.

Each benchmark plants one or two relation chains walking away from a
target node type. Every planted relation is out-regular (every source node
has exactly ``out_degree`` neighbors), so mean aggregation along a chain
preserves path-count argmaxes. Nodes on a chain carry a hidden group per
chain (contiguous, balanced blocks); chain edges pick in-group neighbors
except for a ``mix`` fraction of stray draws, which makes the majority
group of a node's chain endpoints decisive rather than a coin flip.

* single chain: a target node's class is the majority group among its
  realized chain endpoints (ties to the lowest group).
* two chains: each chain contributes one group bit (2 groups per terminal
  type); the class is the mixed-radix combination of the realized bits, so
  any single chain can explain only part of the label.

Labels are always computed from the realized graph, never from the hidden
groups, so a brute-force path-walk oracle reproduces them exactly.

Chain-terminal nodes carry their group as an explicit one-hot feature;
every other type gets a constant single-column feature. Nodes that all
look alike cannot memorize the target signal, and a one-hot group feature
offers no per-node code for a noise relation to exploit, so the class
information is reachable only by aggregating terminal groups along the
planted chain, which is what a correct search has to find.

Distractor relations mirror planted schemas with Erdos-Renyi edges of the
same expected density. Label noise resamples a fraction of labels
uniformly at random. All randomness flows from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .derive import MetaMultigraph
from .errors import ConfigError
from .graphs import HinGraph, Relation, SplitSpec
from .supernet import Edge
from .validation import check_fraction, check_positive_int, check_seed


@dataclass
class RelationSpec:
    """A planted out-regular relation."""

    name: str
    src: str
    dst: str
    out_degree: int


@dataclass
class SynthSpec:
    """Recipe for one synthetic benchmark."""

    node_counts: dict[str, int]
    relations: tuple[RelationSpec, ...]
    target_type: str
    chains: tuple[tuple[str, ...], ...]
    groups: int = 3
    noise: float = 0.0
    mix: float = 0.05
    distractors: int = 2
    train_frac: float = 0.6
    val_frac: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        self.relations = tuple(self.relations)
        self.chains = tuple(tuple(c) for c in self.chains)
        check_seed(self.seed)
        check_positive_int(self.groups, "groups", minimum=2)
        if not isinstance(self.distractors, (int, np.integer)) or self.distractors < 0:
            raise ConfigError(f"distractors must be a non-negative integer, got {self.distractors!r}")
        self.noise = check_fraction(self.noise, "noise")
        if self.noise >= 0.5:
            raise ConfigError(f"noise must be < 0.5, got {self.noise}")
        self.mix = check_fraction(self.mix, "mix")
        if self.mix >= 0.5:
            raise ConfigError(f"mix must be < 0.5, got {self.mix}")
        self.train_frac = check_fraction(self.train_frac, "train_frac")
        self.val_frac = check_fraction(self.val_frac, "val_frac")
        if self.train_frac + self.val_frac >= 1.0:
            raise ConfigError("train_frac + val_frac must leave room for a test split")
        if self.target_type not in self.node_counts:
            raise ConfigError(f"target_type {self.target_type!r} is not a node type")
        by_name = {r.name: r for r in self.relations}
        if len(by_name) != len(self.relations):
            raise ConfigError("duplicate relation names in spec")
        for r in self.relations:
            check_positive_int(r.out_degree, f"out_degree of {r.name!r}")
            for t in (r.src, r.dst):
                if t not in self.node_counts:
                    raise ConfigError(f"relation {r.name!r} references unknown type {t!r}")
            if r.out_degree > self.node_counts[r.dst]:
                raise ConfigError(
                    f"relation {r.name!r} out_degree {r.out_degree} exceeds "
                    f"{self.node_counts[r.dst]} destination nodes"
                )
        if not self.chains or len(self.chains) > 2:
            raise ConfigError("spec needs one or two chains")
        depths = {len(c) for c in self.chains}
        if depths == {0} or len(depths) != 1:
            raise ConfigError("chains must be non-empty and share one length")
        terminals = []
        type_paths = []
        for chain in self.chains:
            at = self.target_type
            path = [at]
            for name in chain:
                if name not in by_name:
                    raise ConfigError(f"chain relation {name!r} is not declared")
                rel = by_name[name]
                if rel.src != at:
                    raise ConfigError(
                        f"chain {chain} breaks at {name!r}: expected source {at!r}, "
                        f"found {rel.src!r}"
                    )
                at = rel.dst
                path.append(at)
            if len(set(path)) != len(path):
                raise ConfigError(f"chain {chain} revisits a node type")
            terminals.append(at)
            type_paths.append(tuple(path))
        if len(self.chains) == 2:
            if terminals[0] == terminals[1]:
                raise ConfigError("two-chain specs need distinct terminal types")
            if self.groups != 2:
                raise ConfigError("two-chain specs require groups=2")
        self._terminals = tuple(terminals)
        self._type_paths = tuple(type_paths)

    @property
    def depth(self) -> int:
        return len(self.chains[0])

    @property
    def n_classes(self) -> int:
        return self.groups ** len(self.chains)


@dataclass
class PlantedTruth:
    """What a perfect search should recover."""

    depth: int
    chains: tuple[tuple[str, ...], ...]
    required: dict[Edge, tuple[str, ...]]
    target_type: str
    n_classes: int

    def __post_init__(self) -> None:
        self.chains = tuple(tuple(c) for c in self.chains)
        self.required = {
            tuple(e): tuple(names) for e, names in self.required.items()
        }


def _regular_adjacency(
    n_src: int, n_dst: int, out_degree: int, rng: np.random.Generator
) -> sparse.csr_matrix:
    cols = np.empty((n_src, out_degree), dtype=np.int64)
    for i in range(n_src):
        cols[i] = rng.choice(n_dst, size=out_degree, replace=False)
    rows = np.repeat(np.arange(n_src), out_degree)
    data = np.ones(rows.size, dtype=np.float64)
    return sparse.coo_matrix((data, (rows, cols.reshape(-1))), shape=(n_src, n_dst)).tocsr()


def _biased_regular_adjacency(
    n_src: int,
    n_dst: int,
    out_degree: int,
    src_key: np.ndarray,
    dst_key: np.ndarray,
    mix: float,
    rng: np.random.Generator,
) -> sparse.csr_matrix:
    """Out-regular adjacency whose rows prefer destinations with a matching key.

    Each of ``out_degree`` draws lands inside the matching-key pool with
    probability ``1 - mix`` and anywhere else otherwise, without replacement.
    When a pool is too small the remainder spills over to the complement, so
    rows always have exactly ``out_degree`` distinct neighbors.
    """
    pools = {int(k): np.flatnonzero(dst_key == k) for k in np.unique(src_key)}
    comps = {k: np.flatnonzero(dst_key != k) for k in pools}
    k_in_row = rng.binomial(out_degree, 1.0 - mix, size=n_src)
    cols = np.empty((n_src, out_degree), dtype=np.int64)
    for i in range(n_src):
        pool = pools[int(src_key[i])]
        comp = comps[int(src_key[i])]
        k_in = min(int(k_in_row[i]), pool.size)
        k_out = min(out_degree - k_in, comp.size)
        k_in = out_degree - k_out
        cols[i, :k_in] = rng.choice(pool, size=k_in, replace=False)
        cols[i, k_in:] = rng.choice(comp, size=k_out, replace=False)
    rows = np.repeat(np.arange(n_src), out_degree)
    data = np.ones(rows.size, dtype=np.float64)
    return sparse.coo_matrix((data, (rows, cols.reshape(-1))), shape=(n_src, n_dst)).tocsr()


def _er_adjacency(
    n_src: int, n_dst: int, density: float, rng: np.random.Generator
) -> sparse.csr_matrix:
    mask = rng.random((n_src, n_dst)) < density
    return sparse.csr_matrix(mask.astype(np.float64))


def _group_of(n_nodes: int, groups: int) -> np.ndarray:
    """Contiguous group blocks over node ids."""
    return (np.arange(n_nodes) * groups) // n_nodes


def _chain_groups(spec: SynthSpec) -> dict[tuple[str, int], np.ndarray]:
    """Hidden per-chain group of every node on a chain.

    A type sitting on several chains gets one contiguous combined profile
    whose mixed-radix digits are the per-chain groups, so every group
    combination is equally represented.
    """
    chains_at: dict[str, list[int]] = {}
    for c, path in enumerate(spec._type_paths):
        for t in path:
            chains_at.setdefault(t, []).append(c)
    out: dict[tuple[str, int], np.ndarray] = {}
    for t, cs in chains_at.items():
        combined = _group_of(spec.node_counts[t], spec.groups ** len(cs))
        for idx, c in enumerate(cs):
            out[(t, c)] = (combined // spec.groups ** (len(cs) - 1 - idx)) % spec.groups
    return out


def generate_hin(spec: SynthSpec) -> tuple[HinGraph, SplitSpec, PlantedTruth]:
    """Materialize a benchmark: graph, stratified splits, and ground truth."""
    ss = np.random.SeedSequence(spec.seed)
    rng_rel, rng_dist, rng_noise, rng_split = (
        np.random.default_rng(child) for child in ss.spawn(4)
    )

    rel_chains: dict[str, list[int]] = {}
    for c, chain in enumerate(spec.chains):
        for name in chain:
            rel_chains.setdefault(name, []).append(c)
    groups_of = _chain_groups(spec)

    relations: dict[str, Relation] = {}
    for r in spec.relations:
        n_src, n_dst = spec.node_counts[r.src], spec.node_counts[r.dst]
        cs = rel_chains.get(r.name, [])
        if cs:
            src_key = np.zeros(n_src, dtype=np.int64)
            dst_key = np.zeros(n_dst, dtype=np.int64)
            for c in cs:
                src_key = src_key * spec.groups + groups_of[(r.src, c)]
                dst_key = dst_key * spec.groups + groups_of[(r.dst, c)]
            adj = _biased_regular_adjacency(
                n_src, n_dst, r.out_degree, src_key, dst_key, spec.mix, rng_rel
            )
        else:
            adj = _regular_adjacency(n_src, n_dst, r.out_degree, rng_rel)
        relations[r.name] = Relation(r.name, r.src, r.dst, adj)
    for k in range(spec.distractors):
        mirror = spec.relations[k % len(spec.relations)]
        name = f"noise{k}"
        if name in relations:
            raise ConfigError(f"distractor name {name!r} collides with a relation")
        density = mirror.out_degree / spec.node_counts[mirror.dst]
        adj = _er_adjacency(
            spec.node_counts[mirror.src], spec.node_counts[mirror.dst], density, rng_dist
        )
        relations[name] = Relation(name, mirror.src, mirror.dst, adj)

    n_target = spec.node_counts[spec.target_type]
    bits = np.zeros((n_target, len(spec.chains)), dtype=np.int64)
    for c, chain in enumerate(spec.chains):
        terminal = spec._terminals[c]
        onehot = np.zeros((spec.node_counts[terminal], spec.groups), dtype=np.float64)
        onehot[np.arange(spec.node_counts[terminal]), groups_of[(terminal, c)]] = 1.0
        counts = onehot
        for name in reversed(chain):
            counts = relations[name].adjacency @ counts
        bits[:, c] = counts.argmax(axis=1)
    labels = np.zeros(n_target, dtype=np.int64)
    for c in range(len(spec.chains)):
        labels = labels * spec.groups + bits[:, c]

    n_flip = int(round(spec.noise * n_target))
    if n_flip:
        idx = rng_noise.choice(n_target, size=n_flip, replace=False)
        labels[idx] = rng_noise.integers(0, spec.n_classes, size=n_flip)

    parts: dict[str, list[np.ndarray]] = {"train": [], "val": [], "test": []}
    for cls in range(spec.n_classes):
        members = np.flatnonzero(labels == cls)
        if members.size == 0:
            raise ConfigError(
                f"class {cls} has no members; increase node counts or adjust groups"
            )
        members = rng_split.permutation(members)
        n_tr = int(spec.train_frac * members.size)
        n_va = int(spec.val_frac * members.size)
        if min(n_tr, n_va, members.size - n_tr - n_va) < 1:
            raise ConfigError(
                f"class {cls} is too small ({members.size}) for the split fractions"
            )
        parts["train"].append(members[:n_tr])
        parts["val"].append(members[n_tr : n_tr + n_va])
        parts["test"].append(members[n_tr + n_va :])

    splits = SplitSpec(
        task="classification",
        train=np.sort(np.concatenate(parts["train"])),
        val=np.sort(np.concatenate(parts["val"])),
        test=np.sort(np.concatenate(parts["test"])),
    )

    features: dict[str, np.ndarray] = {}
    for c, terminal in enumerate(spec._terminals):
        onehot = np.zeros((spec.node_counts[terminal], spec.groups), dtype=np.float64)
        onehot[np.arange(spec.node_counts[terminal]), groups_of[(terminal, c)]] = 1.0
        features[terminal] = onehot
    for t in sorted(spec.node_counts):
        if t not in features:
            features[t] = np.ones((spec.node_counts[t], 1), dtype=np.float64)

    graph = HinGraph(
        node_counts=dict(spec.node_counts),
        relations=relations,
        features=features,
        labels=labels,
        label_type=spec.target_type,
    )

    depth = spec.depth
    required: dict[Edge, tuple[str, ...]] = {}
    for k in range(depth):
        slot = (k, k + 1)
        names = sorted({chain[depth - 1 - k] for chain in spec.chains})
        required[slot] = tuple(names)
    truth = PlantedTruth(
        depth=depth,
        chains=spec.chains,
        required=required,
        target_type=spec.target_type,
        n_classes=spec.n_classes,
    )
    return graph, splits, truth


def planted_recovery_score(arch: MetaMultigraph, truth: PlantedTruth) -> float:
    """Fraction of required (slot, relation) pairs the architecture retained.

    Only defined when the architecture depth matches the planted chain
    length; extra retained candidates are not penalized.
    """
    if arch.depth != truth.depth:
        raise ConfigError(
            f"architecture depth {arch.depth} does not match planted depth {truth.depth}"
        )
    hits = 0
    total = 0
    for slot, names in truth.required.items():
        kept = set(arch.retained[slot])
        for name in names:
            total += 1
            hits += name in kept
    if total == 0:
        raise ConfigError("planted truth lists no required pairs")
    return hits / total


# -- canonical benchmark recipes ----------------------------------------------


def single_chain_spec(
    scale: float = 1.0, noise: float = 0.0, distractors: int = 2, seed: int = 0,
    groups: int = 3, out_degree: int = 4, mix: float = 0.05,
) -> SynthSpec:
    """One planted chain A -> P -> C; class = majority endpoint group."""
    def sz(n: int) -> int:
        return max(groups * 2, int(round(n * scale)))

    return SynthSpec(
        node_counts={"A": sz(1500), "P": sz(900), "C": sz(600)},
        relations=(
            RelationSpec("AP", "A", "P", out_degree),
            RelationSpec("PC", "P", "C", out_degree),
        ),
        target_type="A",
        chains=(("AP", "PC"),),
        groups=groups,
        noise=noise,
        mix=mix,
        distractors=distractors,
        seed=seed,
    )


def multi_chain_spec(
    scale: float = 1.0, noise: float = 0.0, distractors: int = 2, seed: int = 0,
    out_degree: int = 4, mix: float = 0.05,
) -> SynthSpec:
    """Two chains A -> P -> C and A -> P -> I; class = (C bit, I bit)."""
    def sz(n: int) -> int:
        return max(4, int(round(n * scale)))

    return SynthSpec(
        node_counts={"A": sz(1200), "P": sz(900), "C": sz(450), "I": sz(450)},
        relations=(
            RelationSpec("AP", "A", "P", out_degree),
            RelationSpec("PC", "P", "C", out_degree),
            RelationSpec("PI", "P", "I", out_degree),
        ),
        target_type="A",
        chains=(("AP", "PC"), ("AP", "PI")),
        groups=2,
        noise=noise,
        mix=mix,
        distractors=distractors,
        seed=seed,
    )
