"""Artifact files: canonical JSON/CSV writers, schema validation, hashing.

Every JSON artifact carries ``format_version`` and (where meaningful) the
hash of the resolved configuration that produced it. Writers are
deterministic down to the byte: keys are sorted, floats use their shortest
round-trip representation, and files end with a single newline. Readers
validate schemas strictly and raise :class:`ArtifactError` naming the file
and the offending field.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .derive import MetaMultigraph
from .errors import ArtifactError
from .graphs import SplitSpec
from .supernet import AlphaSnapshot, edge_pairs
from .synth import PlantedTruth
from .targetnet import EvalReport

FORMAT_VERSION = 1


def _finite(value: float, path: Path, field: str) -> float:
    out = float(value)
    if not np.isfinite(out):
        raise ArtifactError(f"{path}: field {field!r} is not finite")
    return out


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(canonical_json(doc))


def read_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"{path}: file does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ArtifactError(f"{path}: top level must be an object")
    return doc


def _require_keys(doc: dict, keys: set[str], path: Path) -> None:
    have = set(doc)
    if have != keys:
        missing = sorted(keys - have)
        extra = sorted(have - keys)
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"unexpected {extra}")
        raise ArtifactError(f"{path}: schema violation: {'; '.join(detail)}")


def _check_version(doc: dict, path: Path) -> None:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(
            f"{path}: unsupported format_version {doc.get('format_version')!r}, "
            f"expected {FORMAT_VERSION}"
        )


def config_hash(sections: dict[str, dict[str, str]]) -> str:
    """sha256 over sorted ``section.key=value`` lines of a resolved config."""
    lines = [
        f"{section}.{key}={value}"
        for section, keys in sections.items()
        for key, value in keys.items()
    ]
    blob = "\n".join(sorted(lines)).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# -- architecture.json -------------------------------------------------------

ARCH_KEYS = {"format_version", "depth", "edges", "lambda_seq", "lambda_res", "config_hash"}
ARCH_EDGE_KEYS = {"from", "to", "retained", "strengths"}


def write_architecture(path: str | Path, arch: MetaMultigraph, cfg_hash: str = "") -> None:
    path = Path(path)
    edges = []
    for e in edge_pairs(arch.depth):
        edges.append(
            {
                "from": e[0],
                "to": e[1],
                "retained": list(arch.retained[e]),
                "strengths": [_finite(v, path, "strengths") for v in arch.strengths[e]],
            }
        )
    write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "depth": arch.depth,
            "edges": edges,
            "lambda_seq": _finite(arch.lambda_seq, path, "lambda_seq"),
            "lambda_res": _finite(arch.lambda_res, path, "lambda_res"),
            "config_hash": cfg_hash,
        },
    )


def read_architecture(path: str | Path) -> tuple[MetaMultigraph, str]:
    path = Path(path)
    doc = read_json(path)
    _check_version(doc, path)
    _require_keys(doc, ARCH_KEYS, path)
    if not isinstance(doc["depth"], int) or doc["depth"] < 1:
        raise ArtifactError(f"{path}: depth must be a positive integer")
    expected = edge_pairs(doc["depth"])
    if not isinstance(doc["edges"], list) or len(doc["edges"]) != len(expected):
        raise ArtifactError(
            f"{path}: expected {len(expected)} edges for depth {doc['depth']}"
        )
    retained = {}
    strengths = {}
    for entry, want in zip(doc["edges"], expected):
        if not isinstance(entry, dict):
            raise ArtifactError(f"{path}: edge entries must be objects")
        _require_keys(entry, ARCH_EDGE_KEYS, path)
        e = (entry["from"], entry["to"])
        if e != want:
            raise ArtifactError(f"{path}: edge {e} out of order, expected {want}")
        names = entry["retained"]
        vals = entry["strengths"]
        if (
            not isinstance(names, list)
            or not names
            or not all(isinstance(n, str) for n in names)
        ):
            raise ArtifactError(f"{path}: edge {e} retained must be a non-empty name list")
        if not isinstance(vals, list) or len(vals) != len(names):
            raise ArtifactError(f"{path}: edge {e} strengths must align with retained")
        retained[e] = tuple(names)
        strengths[e] = tuple(_finite(v, path, f"strengths of {e}") for v in vals)
    arch = MetaMultigraph(
        depth=doc["depth"],
        retained=retained,
        strengths=strengths,
        lambda_seq=_finite(doc["lambda_seq"], path, "lambda_seq"),
        lambda_res=_finite(doc["lambda_res"], path, "lambda_res"),
    )
    if not isinstance(doc["config_hash"], str):
        raise ArtifactError(f"{path}: config_hash must be a string")
    return arch, doc["config_hash"]


# -- alpha.json ---------------------------------------------------------------

ALPHA_KEYS = {
    "format_version", "depth", "candidates", "edges", "seed", "mode",
    "val_metric", "config_hash",
}
ALPHA_EDGE_KEYS = {"from", "to", "alpha"}


def write_alpha(
    path: str | Path,
    snapshot: AlphaSnapshot,
    seed: int,
    mode: str,
    val_metric: float,
    cfg_hash: str = "",
) -> None:
    path = Path(path)
    edges = [
        {
            "from": e[0],
            "to": e[1],
            "alpha": [_finite(v, path, "alpha") for v in snapshot.alphas[e]],
        }
        for e in edge_pairs(snapshot.depth)
    ]
    write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "depth": snapshot.depth,
            "candidates": list(snapshot.candidates),
            "edges": edges,
            "seed": int(seed),
            "mode": mode,
            "val_metric": _finite(val_metric, path, "val_metric"),
            "config_hash": cfg_hash,
        },
    )


def read_alpha(path: str | Path) -> tuple[AlphaSnapshot, dict]:
    path = Path(path)
    doc = read_json(path)
    _check_version(doc, path)
    _require_keys(doc, ALPHA_KEYS, path)
    cands = doc["candidates"]
    if not isinstance(cands, list) or not all(isinstance(c, str) for c in cands):
        raise ArtifactError(f"{path}: candidates must be a list of names")
    expected = edge_pairs(doc["depth"])
    if len(doc["edges"]) != len(expected):
        raise ArtifactError(f"{path}: expected {len(expected)} edges")
    alphas = {}
    for entry, want in zip(doc["edges"], expected):
        _require_keys(entry, ALPHA_EDGE_KEYS, path)
        if (entry["from"], entry["to"]) != want:
            raise ArtifactError(f"{path}: edges out of canonical order")
        vec = entry["alpha"]
        if len(vec) != len(cands):
            raise ArtifactError(
                f"{path}: edge {want} has {len(vec)} scores for {len(cands)} candidates"
            )
        alphas[want] = np.array([_finite(v, path, "alpha") for v in vec], dtype=np.float64)
    snapshot = AlphaSnapshot(depth=doc["depth"], candidates=tuple(cands), alphas=alphas)
    meta = {
        "seed": doc["seed"],
        "mode": doc["mode"],
        "val_metric": doc["val_metric"],
        "config_hash": doc["config_hash"],
    }
    return snapshot, meta


# -- eval_report.json ---------------------------------------------------------

REPORT_KEYS = {
    "format_version", "task", "seeds", "per_seed", "mean", "std", "config_hash",
}


def write_eval_report(path: str | Path, report: EvalReport, cfg_hash: str = "") -> None:
    path = Path(path)
    doc = report.to_dict()
    for name, stats in (("mean", doc["mean"]), ("std", doc["std"])):
        for k, v in stats.items():
            stats[k] = _finite(v, path, f"{name}.{k}")
    doc["format_version"] = FORMAT_VERSION
    doc["config_hash"] = cfg_hash
    write_json(path, doc)


def read_eval_report(path: str | Path) -> tuple[EvalReport, str]:
    path = Path(path)
    doc = read_json(path)
    _check_version(doc, path)
    _require_keys(doc, REPORT_KEYS, path)
    report = EvalReport(
        task=doc["task"],
        seeds=list(doc["seeds"]),
        per_seed=[dict(r) for r in doc["per_seed"]],
        mean=dict(doc["mean"]),
        std=dict(doc["std"]),
    )
    return report, doc["config_hash"]


# -- splits.json ---------------------------------------------------------------

SPLIT_KEYS_CLS = {"format_version", "task", "train", "val", "test"}
SPLIT_KEYS_REC = SPLIT_KEYS_CLS | {"pair_relation"}


def write_splits(path: str | Path, splits: SplitSpec) -> None:
    doc: dict = {"format_version": FORMAT_VERSION, "task": splits.task}
    for part, arr in splits.parts().items():
        doc[part] = arr.tolist()
    if splits.task == "recommendation":
        doc["pair_relation"] = splits.pair_relation
    write_json(path, doc)


def read_splits(path: str | Path) -> SplitSpec:
    path = Path(path)
    doc = read_json(path)
    _check_version(doc, path)
    task = doc.get("task")
    if task == "classification":
        _require_keys(doc, SPLIT_KEYS_CLS, path)
        return SplitSpec(
            task=task,
            train=np.array(doc["train"], dtype=np.int64),
            val=np.array(doc["val"], dtype=np.int64),
            test=np.array(doc["test"], dtype=np.int64),
        )
    if task == "recommendation":
        _require_keys(doc, SPLIT_KEYS_REC, path)
        def _arr(name: str) -> np.ndarray:
            arr = np.array(doc[name], dtype=np.int64)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ArtifactError(f"{path}: {name} must be a list of [src, dst, label]")
            return arr
        return SplitSpec(
            task=task,
            train=_arr("train"),
            val=_arr("val"),
            test=_arr("test"),
            pair_relation=doc["pair_relation"],
        )
    raise ArtifactError(f"{path}: unknown task {task!r}")


# -- planted_truth.json ---------------------------------------------------------

TRUTH_KEYS = {
    "format_version", "depth", "chains", "required", "target_type", "n_classes",
}


def write_planted_truth(path: str | Path, truth: PlantedTruth) -> None:
    required = [
        {"from": e[0], "to": e[1], "relations": list(names)}
        for e, names in sorted(truth.required.items())
    ]
    write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "depth": truth.depth,
            "chains": [list(c) for c in truth.chains],
            "required": required,
            "target_type": truth.target_type,
            "n_classes": truth.n_classes,
        },
    )


def read_planted_truth(path: str | Path) -> PlantedTruth:
    path = Path(path)
    doc = read_json(path)
    _check_version(doc, path)
    _require_keys(doc, TRUTH_KEYS, path)
    required = {}
    for entry in doc["required"]:
        _require_keys(entry, {"from", "to", "relations"}, path)
        required[(entry["from"], entry["to"])] = tuple(entry["relations"])
    return PlantedTruth(
        depth=doc["depth"],
        chains=tuple(tuple(c) for c in doc["chains"]),
        required=required,
        target_type=doc["target_type"],
        n_classes=doc["n_classes"],
    )


# -- CSV/TSV tables -------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path: str | Path, header: list[str], rows: list[list]) -> None:
    """Deterministic delimited table; delimiter picked from the suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    delim = "\t" if path.suffix == ".tsv" else ","
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delim, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


SEARCH_LOG_HEADER = ["epoch", "train_loss", "val_loss", "val_metric"]


def write_search_log(path: str | Path, history: list[dict]) -> None:
    rows = [[h[k] for k in SEARCH_LOG_HEADER] for h in history]
    write_table(path, SEARCH_LOG_HEADER, rows)


STABILITY_HEADER = ["mode", "seed", "steps", "status", "metric_mean", "metric_std"]


def write_stability(path: str | Path, rows: list) -> None:
    table = []
    for r in rows:
        mean = "" if r.metric_mean is None else repr(float(r.metric_mean))
        std = "" if r.metric_std is None else repr(float(r.metric_std))
        table.append([r.mode, r.seed, r.steps, r.status, mean, std])
    write_table(path, STABILITY_HEADER, table)


def read_stability(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"{path}: file does not exist")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != STABILITY_HEADER:
        raise ArtifactError(f"{path}: expected header {STABILITY_HEADER}")
    out = []
    for row in rows[1:]:
        if len(row) != len(STABILITY_HEADER):
            raise ArtifactError(f"{path}: malformed row {row}")
        out.append(
            {
                "mode": row[0],
                "seed": int(row[1]),
                "steps": int(row[2]),
                "status": row[3],
                "metric_mean": float(row[4]) if row[4] else None,
                "metric_std": float(row[5]) if row[5] else None,
            }
        )
    return out
