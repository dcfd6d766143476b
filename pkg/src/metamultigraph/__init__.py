"""Differentiable meta-multigraph architecture search on heterogeneous graphs.

Pipeline: build or load a typed multigraph, search a relaxed super-network
with partial candidate sampling, derive a compact meta multigraph by
thresholded retention, retrain it from scratch, and evaluate node
classification or link recommendation.
"""

from .autodiff import Tape, finite_difference, softmax_probs
from .derive import (
    DeriveConfig,
    MetaMultigraph,
    derive_multigraph,
    derive_single_path,
    retained_set,
    threshold,
)
from .errors import (
    ArtifactError,
    ConfigError,
    DataError,
    DivergenceError,
    MultigraphError,
    NotFittedError,
    ShapeError,
)
from .graphs import (
    HinGraph,
    Relation,
    SplitSpec,
    build_recommendation_splits,
    load_hin,
    normalized_adjacency,
    write_hin,
)
from .metrics import accuracy, auc_score, f1_scores
from .optim import AdamState, adam_step
from .search import (
    MultigraphSearch,
    SearchConfig,
    SearchOutcome,
    init_search,
    multi_run_select,
    run_search,
    run_search_multi,
    search_step,
)
from .supernet import (
    AlphaSnapshot,
    CandidatePath,
    SuperNet,
    build_supernet,
    edge_pairs,
    forward_full,
    forward_partial,
    ones_gates,
    path_strengths,
    sample_count,
    sample_gates,
)
from .synth import (
    PlantedTruth,
    RelationSpec,
    SynthSpec,
    generate_hin,
    multi_chain_spec,
    planted_recovery_score,
    single_chain_spec,
)
from .targetnet import (
    EvalReport,
    MultigraphClassifier,
    MultigraphRecommender,
    TargetNet,
    build_target,
    evaluate_auc,
    evaluate_classification,
    repeat_eval,
    target_forward,
    train_target,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AlphaSnapshot",
    "ArtifactError",
    "CandidatePath",
    "ConfigError",
    "DataError",
    "DeriveConfig",
    "DivergenceError",
    "EvalReport",
    "HinGraph",
    "MetaMultigraph",
    "MultigraphClassifier",
    "MultigraphError",
    "MultigraphRecommender",
    "MultigraphSearch",
    "NotFittedError",
    "PlantedTruth",
    "Relation",
    "RelationSpec",
    "SearchConfig",
    "SearchOutcome",
    "ShapeError",
    "SplitSpec",
    "SuperNet",
    "SynthSpec",
    "Tape",
    "TargetNet",
    "accuracy",
    "adam_step",
    "auc_score",
    "build_recommendation_splits",
    "build_supernet",
    "build_target",
    "derive_multigraph",
    "derive_single_path",
    "edge_pairs",
    "evaluate_auc",
    "evaluate_classification",
    "f1_scores",
    "finite_difference",
    "forward_full",
    "forward_partial",
    "generate_hin",
    "init_search",
    "load_hin",
    "multi_chain_spec",
    "multi_run_select",
    "normalized_adjacency",
    "ones_gates",
    "path_strengths",
    "planted_recovery_score",
    "repeat_eval",
    "retained_set",
    "run_search",
    "run_search_multi",
    "sample_count",
    "sample_gates",
    "search_step",
    "single_chain_spec",
    "softmax_probs",
    "target_forward",
    "threshold",
    "train_target",
    "write_hin",
]
