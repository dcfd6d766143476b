"""Thresholded discretization of mixing weights into discrete architectures."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metamultigraph import (
    DeriveConfig,
    MetaMultigraph,
    derive_multigraph,
    derive_single_path,
    edge_pairs,
    retained_set,
    softmax_probs,
    threshold,
)
from metamultigraph.errors import ConfigError, ShapeError
from metamultigraph.supernet import AlphaSnapshot

CANDS = ("AP", "PC", "identity", "zero")


def random_snapshot(seed: int, depth: int = 2) -> AlphaSnapshot:
    rng = np.random.default_rng(seed)
    alphas = {e: rng.normal(size=len(CANDS)) for e in edge_pairs(depth)}
    return AlphaSnapshot(depth=depth, candidates=list(CANDS), alphas=alphas)


def test_threshold_hand_values():
    s = np.array([0.1, 0.3, 0.6])
    assert threshold(s, 0.5) == pytest.approx(0.35)
    assert threshold(s, 1.0) == 0.6
    assert threshold(s, 0.0) == 0.1


@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=8), st.floats(0, 1))
@settings(max_examples=80, deadline=None)
def test_threshold_interpolates_min_max(vals, lam):
    s = np.asarray(vals)
    tau = threshold(s, lam)
    assert np.isclose(tau, lam * s.max() + (1 - lam) * s.min(), rtol=1e-12)
    assert s.min() - 1e-12 <= tau <= s.max() + 1e-12


def test_threshold_validation():
    with pytest.raises(ConfigError):
        threshold(np.array([0.2, 0.8]), 1.5)
    with pytest.raises(ShapeError):
        threshold(np.array([]), 0.5)
    with pytest.raises(ShapeError):
        threshold(np.array([0.2, np.nan]), 0.5)


def test_retained_set_is_closed_comparison():
    s = np.array([0.2, 0.3, 0.5])
    assert retained_set(s, ("a", "b", "c"), 0.3) == ("b", "c")
    assert retained_set(s, ("a", "b", "c"), 0.5) == ("c",)
    with pytest.raises(ShapeError):
        retained_set(s, ("a", "b", "c"), 0.6)
    with pytest.raises(ShapeError):
        retained_set(s, ("a", "b"), 0.1)


def test_lambda_one_is_argmax():
    for seed in range(20):
        snap = random_snapshot(seed)
        arch = derive_multigraph(snap, DeriveConfig(1.0, 1.0))
        for e in edge_pairs(2):
            s = softmax_probs(snap.alphas[e])
            winners = tuple(CANDS[k] for k in np.flatnonzero(s == s.max()))
            assert arch.retained[e] == winners


def test_exact_ties_are_all_kept_at_lambda_one():
    alphas = {e: np.zeros(len(CANDS)) for e in edge_pairs(2)}
    snap = AlphaSnapshot(depth=2, candidates=list(CANDS), alphas=alphas)
    arch = derive_multigraph(snap, DeriveConfig(1.0, 1.0))
    for e in edge_pairs(2):
        assert arch.retained[e] == CANDS


def test_lambda_zero_keeps_everything():
    snap = random_snapshot(5)
    arch = derive_multigraph(snap, DeriveConfig(0.0, 0.0))
    for e in edge_pairs(2):
        assert arch.retained[e] == CANDS


@given(st.integers(0, 10**6), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=60, deadline=None)
def test_higher_lambda_keeps_a_subset(seed, l1, l2):
    lo, hi = sorted((l1, l2))
    snap = random_snapshot(seed)
    loose = derive_multigraph(snap, DeriveConfig(lo, lo))
    tight = derive_multigraph(snap, DeriveConfig(hi, hi))
    for e in loose.retained:
        assert set(tight.retained[e]) <= set(loose.retained[e])


def test_recorded_strengths_are_softmax_values():
    snap = random_snapshot(7)
    arch = derive_multigraph(snap, DeriveConfig(0.4, 0.4))
    for e in edge_pairs(2):
        s = softmax_probs(snap.alphas[e])
        for name, val in zip(arch.retained[e], arch.strengths[e]):
            assert val == s[CANDS.index(name)]


def test_single_path_keeps_lowest_index_on_ties():
    alphas = {e: np.zeros(len(CANDS)) for e in edge_pairs(2)}
    snap = AlphaSnapshot(depth=2, candidates=list(CANDS), alphas=alphas)
    arch = derive_single_path(snap)
    assert arch.lambda_seq == 1.0 and arch.lambda_res == 1.0
    for e in edge_pairs(2):
        assert arch.retained[e] == (CANDS[0],)

    snap2 = random_snapshot(9)
    arch2 = derive_single_path(snap2)
    for e in edge_pairs(2):
        assert len(arch2.retained[e]) == 1
        s = softmax_probs(snap2.alphas[e])
        assert arch2.retained[e][0] == CANDS[int(np.argmax(s))]


def test_sequential_and_residual_factors():
    cfg = DeriveConfig(0.3, 0.8)
    assert cfg.factor((0, 1)) == 0.3
    assert cfg.factor((1, 2)) == 0.3
    assert cfg.factor((0, 2)) == 0.8
    with pytest.raises(ConfigError):
        DeriveConfig(1.2, 0.5)
    with pytest.raises(ConfigError):
        DeriveConfig(0.5, -0.1)


def test_mixed_lambdas_apply_per_edge_kind():
    snap = random_snapshot(11)
    strict_seq = derive_multigraph(snap, DeriveConfig(1.0, 0.0))
    for (i, j), names in strict_seq.retained.items():
        if j == i + 1:
            assert len(names) <= 2  # argmax set
        else:
            assert names == CANDS


def test_architecture_validation():
    edges = edge_pairs(2)
    retained = {e: ("AP",) for e in edges}
    strengths = {e: (1.0,) for e in edges}
    arch = MetaMultigraph(2, retained, strengths, 0.9, 0.9)
    assert list(arch.active_edges()) == edges
    assert tuple(arch.relations_used()) == ("AP",)

    with pytest.raises(ShapeError):
        MetaMultigraph(2, {e: ("AP",) for e in edges[:-1]},
                       {e: (1.0,) for e in edges[:-1]}, 0.9, 0.9)
    with pytest.raises(ShapeError):
        MetaMultigraph(2, retained, {e: (1.0, 0.5) for e in edges}, 0.9, 0.9)
    with pytest.raises(ShapeError):
        MetaMultigraph(2, {e: () for e in edges}, {e: () for e in edges}, 0.9, 0.9)


def test_zero_only_edges_are_inactive():
    edges = edge_pairs(2)
    retained = {e: ("zero",) for e in edges}
    retained[(0, 1)] = ("PC", "identity")
    strengths = {e: tuple(1.0 for _ in retained[e]) for e in edges}
    arch = MetaMultigraph(2, retained, strengths, 0.9, 0.9)
    assert list(arch.active_edges()) == [(0, 1)]
    assert tuple(arch.relations_used()) == ("PC",)
