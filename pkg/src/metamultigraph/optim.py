"""Adam with decoupled weight decay and optional per-entry update masks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .validation import check_finite


@dataclass
class AdamState:
    """Optimizer state for a named family of parameter arrays.

    Weight decay is decoupled (applied directly to the parameter, scaled by
    the learning rate) and defaults to zero so that a zero-gradient step
    with fresh moments leaves parameters bit-identical.
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lr) and self.lr > 0):
            raise ShapeError(f"lr must be positive, got {self.lr}")
        for name, val in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= val < 1.0:
                raise ShapeError(f"{name} must lie in [0, 1), got {val}")
        if self.weight_decay < 0:
            raise ShapeError(f"weight_decay must be non-negative, got {self.weight_decay}")

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], lr: float, **kwargs) -> "AdamState":
        state = cls(lr=lr, **kwargs)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    active: dict[str, np.ndarray] | None = None,
) -> None:
    """One in-place Adam update over a dict of parameter arrays.

    When ``active`` provides a boolean mask for an array, only masked
    entries have their moments and values touched; unmasked entries stay
    bit-identical (their moment buffers are not even decayed).
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name in sorted(params):
        p = params[name]
        if name not in grads:
            raise ShapeError(f"missing gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter {name!r} "
                f"shape {p.shape}"
            )
        check_finite(g, f"gradient of {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        sel = None
        if active is not None and name in active:
            sel = np.asarray(active[name], dtype=bool)
            if sel.shape != p.shape:
                raise ShapeError(
                    f"active mask shape {sel.shape} does not match parameter "
                    f"{name!r} shape {p.shape}"
                )
        if sel is None:
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
            if state.weight_decay:
                update = update + state.weight_decay * p
            p -= state.lr * update
        else:
            gs = g[sel]
            m[sel] = state.beta1 * m[sel] + (1.0 - state.beta1) * gs
            v[sel] = state.beta2 * v[sel] + (1.0 - state.beta2) * np.square(gs)
            update = (m[sel] / bc1) / (np.sqrt(v[sel] / bc2) + state.eps)
            if state.weight_decay:
                update = update + state.weight_decay * p[sel]
            p[sel] = p[sel] - state.lr * update
