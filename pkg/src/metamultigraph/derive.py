"""Turn searched edge scores into a compact discrete meta multigraph.

Each multi-edge keeps every candidate whose mixing strength clears a
per-edge threshold interpolating between the strongest and weakest
strength: tau = lam * max + (1 - lam) * min, with the comparison closed
(strength >= tau retains). Sequential edges (j = i + 1) and skip edges
(j > i + 1) use separate interpolation factors. At lam = 1 the rule keeps
exactly the argmax candidates (all, under exact ties); the single-path
variant instead keeps one candidate per edge, breaking ties toward the
lowest candidate index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .supernet import IDENTITY, ZERO, AlphaSnapshot, Edge, edge_pairs
from .validation import check_fraction


@dataclass
class DeriveConfig:
    """Interpolation factors for sequential and skip multi-edges."""

    lambda_seq: float = 0.9
    lambda_res: float = 0.9

    def __post_init__(self) -> None:
        self.lambda_seq = check_fraction(self.lambda_seq, "lambda_seq")
        self.lambda_res = check_fraction(self.lambda_res, "lambda_res")

    def factor(self, edge: Edge) -> float:
        i, j = edge
        return self.lambda_seq if j == i + 1 else self.lambda_res


@dataclass
class MetaMultigraph:
    """A derived discrete architecture.

    ``retained`` maps each multi-edge to the kept candidate names (canonical
    candidate order preserved); ``strengths`` holds the matching searched
    mixing strengths for reporting.
    """

    depth: int
    retained: dict[Edge, tuple[str, ...]]
    strengths: dict[Edge, tuple[float, ...]]
    lambda_seq: float
    lambda_res: float

    def __post_init__(self) -> None:
        expected = set(edge_pairs(self.depth))
        if set(self.retained) != expected or set(self.strengths) != expected:
            raise ShapeError("retained/strengths must cover every multi-edge exactly once")
        for e in self.retained:
            names = tuple(self.retained[e])
            vals = tuple(float(v) for v in self.strengths[e])
            if len(names) != len(vals):
                raise ShapeError(f"edge {e}: {len(names)} names but {len(vals)} strengths")
            if not names:
                raise ShapeError(f"edge {e} retains no candidate")
            self.retained[e] = names
            self.strengths[e] = vals

    def active_edges(self) -> list[Edge]:
        """Edges contributing messages (everything but zero-only edges)."""
        return [e for e in edge_pairs(self.depth) if self.retained[e] != (ZERO,)]

    def relations_used(self) -> set[str]:
        out: set[str] = set()
        for names in self.retained.values():
            out.update(n for n in names if n not in (IDENTITY, ZERO))
        return out


def threshold(strengths: np.ndarray, lam: float) -> float:
    """Per-edge retention threshold: lam * max + (1 - lam) * min."""
    lam = check_fraction(lam, "lambda")
    s = np.asarray(strengths, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ShapeError(f"strengths must be a non-empty vector, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ShapeError("strengths contain non-finite values")
    return float(lam * s.max() + (1.0 - lam) * s.min())


def retained_set(
    strengths: np.ndarray, candidates: tuple[str, ...], tau: float
) -> tuple[str, ...]:
    """Candidates whose strength clears ``tau`` (closed comparison)."""
    s = np.asarray(strengths, dtype=np.float64)
    if s.shape != (len(candidates),):
        raise ShapeError(
            f"strengths shape {s.shape} does not match {len(candidates)} candidates"
        )
    kept = tuple(name for name, v in zip(candidates, s) if v >= tau)
    if not kept:
        raise ShapeError(f"threshold {tau} retains no candidate")
    return kept


def derive_multigraph(snapshot: AlphaSnapshot, config: DeriveConfig) -> MetaMultigraph:
    """Apply thresholded retention to every multi-edge of a snapshot."""
    retained: dict[Edge, tuple[str, ...]] = {}
    strengths: dict[Edge, tuple[float, ...]] = {}
    for e in edge_pairs(snapshot.depth):
        s = snapshot.strengths(e)
        tau = threshold(s, config.factor(e))
        kept = retained_set(s, snapshot.candidates, tau)
        retained[e] = kept
        by_name = dict(zip(snapshot.candidates, s))
        strengths[e] = tuple(float(by_name[n]) for n in kept)
    return MetaMultigraph(
        depth=snapshot.depth,
        retained=retained,
        strengths=strengths,
        lambda_seq=config.lambda_seq,
        lambda_res=config.lambda_res,
    )


def derive_single_path(snapshot: AlphaSnapshot) -> MetaMultigraph:
    """Keep exactly the strongest candidate per edge (lowest index on ties)."""
    retained: dict[Edge, tuple[str, ...]] = {}
    strengths: dict[Edge, tuple[float, ...]] = {}
    for e in edge_pairs(snapshot.depth):
        s = snapshot.strengths(e)
        idx = int(np.argmax(s))
        retained[e] = (snapshot.candidates[idx],)
        strengths[e] = (float(s[idx]),)
    return MetaMultigraph(
        depth=snapshot.depth,
        retained=retained,
        strengths=strengths,
        lambda_seq=1.0,
        lambda_res=1.0,
    )
