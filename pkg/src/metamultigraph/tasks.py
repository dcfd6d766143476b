"""Task plumbing shared by the search network and the retrained network:
split resolution to stacked-row batches, taped losses, and metric readout.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Ref, Tape
from .graphs import HinGraph, SplitSpec
from .metrics import auc_score, f1_scores
from .supernet import ForwardRefs, class_logits, pair_scores


def prepare_batches(graph: HinGraph, splits: SplitSpec) -> dict[str, dict]:
    """Resolve split indices into stacked-row indices and targets per part."""
    out: dict[str, dict] = {}
    if splits.task == "classification":
        off = graph.offset(graph.label_type)
        for part, idx in splits.parts().items():
            out[part] = {"rows": off + idx, "y": graph.labels[idx]}
    else:
        rel = graph.relations[splits.pair_relation]
        soff = graph.offset(rel.src)
        doff = graph.offset(rel.dst)
        for part, arr in splits.parts().items():
            out[part] = {
                "src": soff + arr[:, 0],
                "dst": doff + arr[:, 1],
                "y": arr[:, 2],
            }
    return out


def loss_ref(tape: Tape, refs: ForwardRefs, batch: dict, task: str) -> Ref:
    """Full-batch task loss as a taped scalar."""
    if task == "classification":
        return tape.cross_entropy(class_logits(tape, refs, batch["rows"]), batch["y"])
    return tape.bce_logits(pair_scores(tape, refs, batch["src"], batch["dst"]), batch["y"])


def metric_from_refs(tape: Tape, refs: ForwardRefs, batch: dict, task: str) -> float:
    """Task metric (macro-F1 or AUC) of an already-evaluated forward."""
    if task == "classification":
        logits = tape.value(class_logits(tape, refs, batch["rows"]))
        macro, _ = f1_scores(batch["y"], logits.argmax(axis=1))
        return macro
    scores = tape.value(pair_scores(tape, refs, batch["src"], batch["dst"]))
    return auc_score(np.asarray(scores), batch["y"])
