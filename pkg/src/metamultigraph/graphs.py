"""Typed multigraph containers, dataset directory I/O, and split construction.

A heterogeneous graph is stored as a set of named node types plus a set of
named directed relations, each relation holding a sparse binary adjacency
between one source type and one destination type. Node features are optional
per type; types without an explicit feature table use one-hot identity
features. Datasets live in a directory of TSV files:

    schema.tsv          relation / src_type / dst_type / src_count / dst_count
    edges_<name>.tsv    one local (src, dst) index pair per line
    features_<type>.tsv one row of floats per node (optional per type)
    labels.tsv          global node index -> integer class (optional)

splits.json (read/written by :mod:`metamultigraph.artifacts`) carries the
train/val/test assignment.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ConfigError, DataError, ShapeError
from .validation import check_index_array, check_seed, check_task

# Candidate names reserved for the search space; relations must not use them.
RESERVED_NAMES = ("identity", "zero")

_NAME_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")

SCHEMA_HEADER = ["relation", "src_type", "dst_type", "src_count", "dst_count"]
EDGES_HEADER = ["src", "dst"]
LABELS_HEADER = ["node", "label"]


def _check_name(name: str, kind: str) -> str:
    if not _NAME_RE.match(name):
        raise DataError(f"{kind} name {name!r} contains unsupported characters")
    if name in RESERVED_NAMES:
        raise DataError(f"{kind} name {name!r} is reserved")
    return name


@dataclass
class Relation:
    """A named directed relation with a sparse binary adjacency."""

    name: str
    src: str
    dst: str
    adjacency: sparse.csr_matrix

    def __post_init__(self) -> None:
        self.adjacency = sparse.csr_matrix(self.adjacency, dtype=np.float64)


@dataclass
class HinGraph:
    """A heterogeneous information network.

    ``labels`` (when present) is an int64 array over the nodes of
    ``label_type``, with -1 marking unlabeled nodes.
    """

    node_counts: dict[str, int]
    relations: dict[str, Relation]
    features: dict[str, np.ndarray] = field(default_factory=dict)
    labels: np.ndarray | None = None
    label_type: str | None = None

    def __post_init__(self) -> None:
        self.validate()

    # -- layout ---------------------------------------------------------

    @property
    def type_order(self) -> tuple[str, ...]:
        return tuple(sorted(self.node_counts))

    @property
    def total_nodes(self) -> int:
        return sum(self.node_counts.values())

    def offset(self, node_type: str) -> int:
        """Start of ``node_type``'s block in the stacked node ordering."""
        if node_type not in self.node_counts:
            raise DataError(f"unknown node type {node_type!r}")
        off = 0
        for t in self.type_order:
            if t == node_type:
                return off
            off += self.node_counts[t]
        raise AssertionError("unreachable")

    def global_indices(self, node_type: str, local: np.ndarray) -> np.ndarray:
        local = check_index_array(local, f"{node_type} indices", self.node_counts[node_type])
        return local + self.offset(node_type)

    # -- features -------------------------------------------------------

    def feature_matrix(self, node_type: str):
        """Feature table for one type; identity (sparse) when not explicit."""
        if node_type in self.features:
            return self.features[node_type]
        n = self.node_counts[node_type]
        return sparse.identity(n, dtype=np.float64, format="csr")

    def feature_dim(self, node_type: str) -> int:
        if node_type in self.features:
            return int(self.features[node_type].shape[1])
        return self.node_counts[node_type]

    # -- labels ---------------------------------------------------------

    def labeled_nodes(self) -> np.ndarray:
        if self.labels is None:
            raise DataError("graph has no labels")
        return np.flatnonzero(self.labels >= 0)

    def n_classes(self) -> int:
        if self.labels is None:
            raise DataError("graph has no labels")
        return int(self.labels.max()) + 1

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        if not self.node_counts:
            raise DataError("graph declares no node types")
        for t, n in self.node_counts.items():
            _check_name(t, "node type")
            if not isinstance(n, (int, np.integer)) or n <= 0:
                raise DataError(f"node type {t!r} must have a positive count, got {n!r}")
            self.node_counts[t] = int(n)
        if not self.relations:
            raise DataError("graph declares no relations")
        for name, rel in self.relations.items():
            _check_name(name, "relation")
            if name != rel.name:
                raise DataError(f"relation key {name!r} does not match its name {rel.name!r}")
            for t in (rel.src, rel.dst):
                if t not in self.node_counts:
                    raise DataError(f"relation {name!r} references unknown type {t!r}")
            want = (self.node_counts[rel.src], self.node_counts[rel.dst])
            if rel.adjacency.shape != want:
                raise ShapeError(
                    f"relation {name!r} adjacency has shape {rel.adjacency.shape}, "
                    f"expected {want}"
                )
            if rel.adjacency.nnz and not np.all(np.isfinite(rel.adjacency.data)):
                raise DataError(f"relation {name!r} adjacency has non-finite entries")
        for t, mat in self.features.items():
            if t not in self.node_counts:
                raise DataError(f"features given for unknown type {t!r}")
            mat = np.asarray(mat, dtype=np.float64)
            if mat.ndim != 2 or mat.shape[0] != self.node_counts[t]:
                raise ShapeError(
                    f"features for type {t!r} have shape {mat.shape}, expected "
                    f"({self.node_counts[t]}, d)"
                )
            if not np.all(np.isfinite(mat)):
                raise DataError(f"features for type {t!r} contain non-finite values")
            self.features[t] = mat
        if (self.labels is None) != (self.label_type is None):
            raise DataError("labels and label_type must be set together")
        if self.labels is not None:
            if self.label_type not in self.node_counts:
                raise DataError(f"label_type {self.label_type!r} is not a node type")
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.node_counts[self.label_type],):
                raise ShapeError(
                    f"labels must have one entry per {self.label_type!r} node, "
                    f"got shape {self.labels.shape}"
                )
            if self.labels.size and self.labels.max() < 0:
                raise DataError("labels are present but every node is unlabeled")


@dataclass
class SplitSpec:
    """Train/val/test assignment for one task.

    Classification: 1-D arrays of local node indices into the labeled type.
    Recommendation: (n, 3) arrays of (source index, target index, 0/1 label),
    with ``pair_relation`` naming the user-item relation the indices refer to.
    """

    task: str
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    pair_relation: str | None = None

    def __post_init__(self) -> None:
        check_task(self.task)
        if self.task == "classification":
            self.train = np.asarray(self.train, dtype=np.int64).reshape(-1)
            self.val = np.asarray(self.val, dtype=np.int64).reshape(-1)
            self.test = np.asarray(self.test, dtype=np.int64).reshape(-1)
        else:
            for part in ("train", "val", "test"):
                arr = np.asarray(getattr(self, part), dtype=np.int64)
                if arr.ndim != 2 or arr.shape[1] != 3:
                    raise ShapeError(
                        f"recommendation {part} split must have shape (n, 3), "
                        f"got {arr.shape}"
                    )
                setattr(self, part, arr)
            if self.pair_relation is None:
                raise ConfigError("recommendation splits require pair_relation")

    def parts(self) -> dict[str, np.ndarray]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def validate(self, graph: HinGraph | None = None) -> None:
        for name, arr in self.parts().items():
            if arr.size == 0:
                raise ConfigError(f"{name} split is empty")
        if self.task == "classification":
            seen: set[int] = set()
            for name, arr in self.parts().items():
                dup = seen.intersection(arr.tolist())
                if dup:
                    raise ConfigError(f"splits overlap at node {min(dup)}")
                seen.update(arr.tolist())
            if graph is not None:
                if graph.labels is None:
                    raise DataError("classification splits require a labeled graph")
                n = graph.node_counts[graph.label_type]
                for name, arr in self.parts().items():
                    check_index_array(arr, f"{name} split", n)
                    if np.any(graph.labels[arr] < 0):
                        raise DataError(f"{name} split contains unlabeled nodes")
        else:
            seen_pairs: set[tuple[int, int]] = set()
            for name, arr in self.parts().items():
                labels = np.unique(arr[:, 2])
                if not np.all(np.isin(labels, (0, 1))):
                    raise ConfigError(f"{name} split labels must be 0/1")
                if labels.size < 2:
                    raise ConfigError(f"{name} split must contain both labels")
                pairs = {(int(s), int(d)) for s, d in arr[:, :2]}
                if seen_pairs & pairs:
                    raise ConfigError(f"splits share a pair in {name}")
                seen_pairs |= pairs
            if graph is not None:
                if self.pair_relation not in graph.relations:
                    raise DataError(
                        f"pair_relation {self.pair_relation!r} is not a graph relation"
                    )
                rel = graph.relations[self.pair_relation]
                n_src = graph.node_counts[rel.src]
                n_dst = graph.node_counts[rel.dst]
                adj = rel.adjacency
                for name, arr in self.parts().items():
                    check_index_array(arr[:, 0], f"{name} split sources", n_src)
                    check_index_array(arr[:, 1], f"{name} split targets", n_dst)
                    present = np.asarray(adj[arr[:, 0], arr[:, 1]]).reshape(-1)
                    if np.any(present != 0):
                        raise DataError(
                            f"{name} split contains pairs that are still edges of "
                            f"{self.pair_relation!r}"
                        )


# -- dataset directory I/O -------------------------------------------------


def _read_tsv(path: Path, header: list[str]) -> list[list[str]]:
    if not path.is_file():
        raise DataError(f"missing file {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows or rows[0] != header:
        raise DataError(f"{path}: expected header {header}, got {rows[0] if rows else 'empty file'}")
    return rows[1:]


def _parse_int(text: str, path: Path, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{path}: {what} {text!r} is not an integer") from None


def load_hin(path: str | Path) -> HinGraph:
    """Load a dataset directory into a :class:`HinGraph`."""
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"dataset directory {root} does not exist")

    node_counts: dict[str, int] = {}
    schema_rows = _read_tsv(root / "schema.tsv", SCHEMA_HEADER)
    if not schema_rows:
        raise DataError(f"{root / 'schema.tsv'}: no relations declared")
    declared: dict[str, tuple[str, str]] = {}
    for row in schema_rows:
        if len(row) != 5:
            raise DataError(f"{root / 'schema.tsv'}: malformed row {row}")
        name, src, dst, s_count, d_count = row
        if name in declared:
            raise DataError(f"{root / 'schema.tsv'}: duplicate relation {name!r}")
        declared[name] = (src, dst)
        for t, c in ((src, s_count), (dst, d_count)):
            n = _parse_int(c, root / "schema.tsv", f"count for type {t!r}")
            if t in node_counts and node_counts[t] != n:
                raise DataError(
                    f"{root / 'schema.tsv'}: type {t!r} declared with counts "
                    f"{node_counts[t]} and {n}"
                )
            node_counts[t] = n

    stray = {
        p.name[len("edges_"):-len(".tsv")]
        for p in root.glob("edges_*.tsv")
    } - set(declared)
    if stray:
        raise DataError(
            f"{root}: edge files without a schema row: {sorted(stray)}"
        )

    relations: dict[str, Relation] = {}
    for name, (src, dst) in declared.items():
        epath = root / f"edges_{name}.tsv"
        rows = _read_tsv(epath, EDGES_HEADER)
        n_src, n_dst = node_counts[src], node_counts[dst]
        if rows:
            pairs = np.empty((len(rows), 2), dtype=np.int64)
            for k, row in enumerate(rows):
                if len(row) != 2:
                    raise DataError(f"{epath}: malformed row {row}")
                pairs[k, 0] = _parse_int(row[0], epath, "src index")
                pairs[k, 1] = _parse_int(row[1], epath, "dst index")
            if pairs[:, 0].min() < 0 or pairs[:, 0].max() >= n_src:
                raise DataError(f"{epath}: src index out of range [0, {n_src})")
            if pairs[:, 1].min() < 0 or pairs[:, 1].max() >= n_dst:
                raise DataError(f"{epath}: dst index out of range [0, {n_dst})")
            data = np.ones(len(pairs), dtype=np.float64)
            adj = sparse.coo_matrix(
                (data, (pairs[:, 0], pairs[:, 1])), shape=(n_src, n_dst)
            ).tocsr()
            # duplicate lines collapse to a single binary edge
            adj.data[:] = 1.0
        else:
            adj = sparse.csr_matrix((n_src, n_dst), dtype=np.float64)
        relations[name] = Relation(name, src, dst, adj)

    features: dict[str, np.ndarray] = {}
    for fpath in sorted(root.glob("features_*.tsv")):
        t = fpath.name[len("features_"):-len(".tsv")]
        if t not in node_counts:
            raise DataError(f"{fpath}: unknown node type {t!r}")
        with fpath.open(newline="") as fh:
            rows = list(csv.reader(fh, delimiter="\t"))
        try:
            mat = np.array([[float(x) for x in row] for row in rows], dtype=np.float64)
        except ValueError:
            raise DataError(f"{fpath}: non-numeric feature value") from None
        if mat.ndim != 2 or mat.shape[0] != node_counts[t]:
            raise DataError(
                f"{fpath}: expected {node_counts[t]} rows of equal width, "
                f"got shape {mat.shape}"
            )
        features[t] = mat

    labels = None
    label_type = None
    lpath = root / "labels.tsv"
    if lpath.is_file():
        rows = _read_tsv(lpath, LABELS_HEADER)
        if not rows:
            raise DataError(f"{lpath}: empty label table")
        order = sorted(node_counts)
        offsets = {}
        off = 0
        for t in order:
            offsets[t] = off
            off += node_counts[t]
        total = off
        pairs = []
        for row in rows:
            if len(row) != 2:
                raise DataError(f"{lpath}: malformed row {row}")
            node = _parse_int(row[0], lpath, "node index")
            lab = _parse_int(row[1], lpath, "label")
            if not 0 <= node < total:
                raise DataError(f"{lpath}: node index {node} out of range [0, {total})")
            if lab < 0:
                raise DataError(f"{lpath}: negative label {lab}")
            pairs.append((node, lab))
        # the labeled type is the unique type whose range holds every index
        owners = set()
        for node, _ in pairs:
            for t in order:
                if offsets[t] <= node < offsets[t] + node_counts[t]:
                    owners.add(t)
                    break
        if len(owners) != 1:
            raise DataError(
                f"{lpath}: labeled nodes span multiple types {sorted(owners)}"
            )
        label_type = owners.pop()
        labels = np.full(node_counts[label_type], -1, dtype=np.int64)
        for node, lab in pairs:
            local = node - offsets[label_type]
            if labels[local] >= 0 and labels[local] != lab:
                raise DataError(f"{lpath}: node {node} labeled twice with different classes")
            labels[local] = lab

    return HinGraph(node_counts, relations, features, labels, label_type)


def write_hin(graph: HinGraph, path: str | Path) -> None:
    """Write ``graph`` as a dataset directory (inverse of :func:`load_hin`).

    Types using default identity features get no feature file; the round
    trip preserves graph semantics, not file-level byte identity of inputs.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with (root / "schema.tsv").open("w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(SCHEMA_HEADER)
        for name in sorted(graph.relations):
            rel = graph.relations[name]
            w.writerow(
                [name, rel.src, rel.dst, graph.node_counts[rel.src], graph.node_counts[rel.dst]]
            )
    for name in sorted(graph.relations):
        rel = graph.relations[name]
        coo = rel.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with (root / f"edges_{name}.tsv").open("w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(EDGES_HEADER)
            for k in order:
                w.writerow([int(coo.row[k]), int(coo.col[k])])
    for t in sorted(graph.features):
        with (root / f"features_{t}.tsv").open("w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            for row in graph.features[t]:
                w.writerow([repr(float(x)) for x in row])
    if graph.labels is not None:
        off = graph.offset(graph.label_type)
        with (root / "labels.tsv").open("w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(LABELS_HEADER)
            for local in np.flatnonzero(graph.labels >= 0):
                w.writerow([int(off + local), int(graph.labels[local])])


# -- operators ---------------------------------------------------------------


def normalized_adjacency(graph: HinGraph, relation: str) -> sparse.csr_matrix:
    """Row-normalized adjacency of one relation.

    Each row with at least one edge sums to exactly 1; rows without edges
    stay all-zero (no NaN/Inf is ever produced).
    """
    if relation not in graph.relations:
        raise DataError(f"unknown relation {relation!r}")
    adj = graph.relations[relation].adjacency.tocsr()
    deg = np.asarray(adj.sum(axis=1)).reshape(-1)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    out = sparse.diags(inv).dot(adj).tocsr()
    out.sort_indices()
    return out


# -- recommendation splits ---------------------------------------------------


def build_recommendation_splits(
    ratings, seed: int, pair_relation: str = "user_item"
) -> tuple[np.ndarray, SplitSpec]:
    """Carve link-prediction splits out of a rating table.

    ``ratings`` is an (n, 3) array of (user, item, rating). Pairs rated
    above 3 are positives; half of them (floor) are removed from the graph
    and split 3:1:1 into train/val/test. Pairs rated below 4 form the
    negative pool, sampled without replacement to match the positive count
    in every split. Returns the remaining positive pairs (the edges to keep
    in the graph) and the :class:`SplitSpec`; no split pair is an edge.
    """
    check_seed(seed)
    arr = np.asarray(ratings, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ShapeError(f"ratings must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ConfigError("ratings table is empty")
    if arr[:, 0].min() < 0 or arr[:, 1].min() < 0:
        raise ConfigError("ratings contain negative node indices")
    pairs = arr[:, :2]
    uniq = np.unique(pairs, axis=0)
    if uniq.shape[0] != pairs.shape[0]:
        raise DataError("ratings contain duplicate (user, item) pairs")

    order = np.lexsort((arr[:, 1], arr[:, 0]))
    arr = arr[order]
    pos_pool = arr[arr[:, 2] > 3, :2]
    neg_pool = arr[arr[:, 2] < 4, :2]

    n_sel = pos_pool.shape[0] // 2
    n_val = n_sel // 5
    n_test = n_sel // 5
    n_train = n_sel - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(
            f"too few positive ratings ({pos_pool.shape[0]}) to form non-empty "
            "train/val/test splits; need at least 10"
        )
    if neg_pool.shape[0] < n_sel:
        raise ConfigError(
            f"negative pool ({neg_pool.shape[0]}) smaller than the sampled "
            f"positive count ({n_sel})"
        )

    rng = np.random.default_rng(seed)
    sel_idx = rng.choice(pos_pool.shape[0], size=n_sel, replace=False)
    selected = pos_pool[sel_idx]
    keep = np.ones(pos_pool.shape[0], dtype=bool)
    keep[sel_idx] = False
    edges = pos_pool[keep]

    neg_idx = rng.choice(neg_pool.shape[0], size=n_sel, replace=False)
    negatives = neg_pool[neg_idx]

    def _part(lo: int, hi: int) -> np.ndarray:
        pos = np.column_stack([selected[lo:hi], np.ones(hi - lo, dtype=np.int64)])
        neg = np.column_stack([negatives[lo:hi], np.zeros(hi - lo, dtype=np.int64)])
        return np.vstack([pos, neg])

    split = SplitSpec(
        task="recommendation",
        train=_part(0, n_train),
        val=_part(n_train, n_train + n_val),
        test=_part(n_train + n_val, n_sel),
        pair_relation=pair_relation,
    )
    return edges, split
