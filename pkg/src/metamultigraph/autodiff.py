"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tape` records a Wengert list: each primitive appends one node
holding its value, its parent node ids, and a VJP closure mapping the
output adjoint to parent adjoints. :meth:`Tape.backward` runs the list in
reverse from a scalar loss, accumulating adjoints by addition; leaves that
never influence the loss read back as zero gradients.

Sparse matrices (scipy CSR/CSC) appear only as constants baked into
:meth:`Tape.spmm`; all differentiable values are dense float64 arrays.

The masked softmax (:meth:`Tape.softmax_vector` with a 0/1 ``mask``)
normalizes over the FULL input vector, multiplies the result by the mask,
and deliberately defines its VJP to be the mask-restricted softmax VJP:
inactive coordinates receive exactly zero gradient (a stop-gradient), while
active coordinates receive the true partial derivative of the masked
output. With an all-ones mask it is bit-identical to the plain softmax.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import sparse

from .errors import ShapeError
from .validation import check_finite

Ref = int


def softmax_probs(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a 1-D vector (pure function)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError(f"softmax expects a non-empty 1-D vector, got shape {x.shape}")
    z = x - x.max()
    e = np.exp(z)
    return e / e.sum()


def _as_array(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return check_finite(arr, name)


class Tape:
    """Wengert-list tape. Primitives return integer node refs."""

    def __init__(self) -> None:
        self._values: list[np.ndarray] = []
        self._parents: list[tuple[Ref, ...]] = []
        self._vjps: list[Callable[[np.ndarray], tuple[np.ndarray, ...]] | None] = []
        self._grads: list[np.ndarray | None] | None = None

    def __len__(self) -> int:
        return len(self._values)

    def value(self, ref: Ref) -> np.ndarray:
        return self._values[ref]

    def _record(self, value: np.ndarray, parents: tuple[Ref, ...], vjp) -> Ref:
        self._values.append(value)
        self._parents.append(parents)
        self._vjps.append(vjp)
        return len(self._values) - 1

    # -- leaves -----------------------------------------------------------

    def leaf(self, value, name: str = "leaf") -> Ref:
        """Enter an input (parameter or constant) onto the tape."""
        return self._record(_as_array(value, name), (), None)

    def zeros(self, shape: tuple[int, ...]) -> Ref:
        return self._record(np.zeros(shape, dtype=np.float64), (), None)

    # -- primitives ---------------------------------------------------------

    def matmul(self, a: Ref, b: Ref) -> Ref:
        va, vb = self._values[a], self._values[b]
        if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {va.shape} @ {vb.shape}")
        out = va @ vb

        def vjp(g: np.ndarray):
            return g @ vb.T, va.T @ g

        return self._record(out, (a, b), vjp)

    def spmm(self, mat, x: Ref) -> Ref:
        """Sparse-constant @ dense: ``mat`` is not differentiated."""
        if not sparse.issparse(mat):
            raise ShapeError("spmm expects a scipy sparse constant as first operand")
        vx = self._values[x]
        if vx.ndim != 2 or mat.shape[1] != vx.shape[0]:
            raise ShapeError(f"spmm: incompatible shapes {mat.shape} @ {vx.shape}")
        out = np.asarray(mat @ vx)
        mat_t = mat.T

        def vjp(g: np.ndarray):
            return (np.asarray(mat_t @ g),)

        return self._record(out, (x,), vjp)

    def add(self, a: Ref, b: Ref) -> Ref:
        va, vb = self._values[a], self._values[b]
        if va.shape != vb.shape:
            raise ShapeError(f"add: shape mismatch {va.shape} vs {vb.shape}")
        return self._record(va + vb, (a, b), lambda g: (g, g))

    def scale(self, x: Ref, s: Ref) -> Ref:
        """Multiply an array by a scalar node (0-d ref)."""
        vx, vs = self._values[x], self._values[s]
        if vs.ndim != 0:
            raise ShapeError(f"scale: scalar operand must be 0-d, got shape {vs.shape}")
        out = vx * vs

        def vjp(g: np.ndarray):
            return g * vs, np.asarray((g * vx).sum())

        return self._record(out, (x, s), vjp)

    def relu(self, x: Ref) -> Ref:
        vx = self._values[x]
        gate = (vx > 0).astype(np.float64)
        return self._record(vx * gate, (x,), lambda g: (g * gate,))

    def softmax_vector(self, x: Ref, mask: np.ndarray | None = None) -> Ref:
        """Softmax over the full vector, optionally gated by a 0/1 mask.

        See the module docstring for the stop-gradient VJP convention on
        masked coordinates.
        """
        vx = self._values[x]
        if vx.ndim != 1 or vx.size == 0:
            raise ShapeError(f"softmax_vector expects 1-D input, got shape {vx.shape}")
        p = softmax_probs(vx)
        if mask is None:
            out = p
        else:
            mask = np.asarray(mask, dtype=np.float64)
            if mask.shape != vx.shape:
                raise ShapeError(
                    f"softmax_vector: mask shape {mask.shape} != input shape {vx.shape}"
                )
            if not np.all(np.isin(mask, (0.0, 1.0))):
                raise ShapeError("softmax_vector: mask entries must be 0 or 1")
            out = p * mask

        def vjp(g: np.ndarray):
            gg = g if mask is None else g * mask
            t = p * gg
            gx = t - p * t.sum()
            if mask is not None:
                gx = gx * mask
            return (gx,)

        return self._record(out, (x,), vjp)

    def row_gather(self, x: Ref, rows: np.ndarray) -> Ref:
        vx = self._values[x]
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim != 1:
            raise ShapeError(f"row_gather: rows must be 1-D, got shape {rows.shape}")
        if vx.ndim < 1:
            raise ShapeError("row_gather: input must have at least one axis")
        if rows.size and (rows.min() < 0 or rows.max() >= vx.shape[0]):
            raise ShapeError(
                f"row_gather: row index out of range for first axis of size {vx.shape[0]}"
            )
        out = vx[rows]

        def vjp(g: np.ndarray):
            gx = np.zeros_like(vx)
            np.add.at(gx, rows, g)
            return (gx,)

        return self._record(out, (x,), vjp)

    def pick(self, x: Ref, index: int) -> Ref:
        """Extract one entry of a 1-D vector as a 0-d scalar node."""
        vx = self._values[x]
        if vx.ndim != 1:
            raise ShapeError(f"pick expects a 1-D vector, got shape {vx.shape}")
        if not 0 <= index < vx.size:
            raise ShapeError(f"pick: index {index} out of range for size {vx.size}")
        out = np.asarray(vx[index])

        def vjp(g: np.ndarray):
            gx = np.zeros_like(vx)
            gx[index] = g
            return (gx,)

        return self._record(out, (x,), vjp)

    def sum_all(self, x: Ref) -> Ref:
        vx = self._values[x]
        return self._record(np.asarray(vx.sum()), (x,), lambda g: (np.full_like(vx, g),))

    def rowwise_dot(self, a: Ref, b: Ref) -> Ref:
        va, vb = self._values[a], self._values[b]
        if va.shape != vb.shape or va.ndim != 2:
            raise ShapeError(f"rowwise_dot: need equal 2-D shapes, got {va.shape} vs {vb.shape}")
        out = np.einsum("ij,ij->i", va, vb)

        def vjp(g: np.ndarray):
            return g[:, None] * vb, g[:, None] * va

        return self._record(out, (a, b), vjp)

    def cross_entropy(self, logits: Ref, labels: np.ndarray) -> Ref:
        """Mean softmax cross-entropy; ``labels`` are constant int classes."""
        vl = self._values[logits]
        y = np.asarray(labels, dtype=np.int64)
        if vl.ndim != 2:
            raise ShapeError(f"cross_entropy: logits must be 2-D, got shape {vl.shape}")
        if y.shape != (vl.shape[0],):
            raise ShapeError(
                f"cross_entropy: labels shape {y.shape} does not match {vl.shape[0]} rows"
            )
        if y.size == 0:
            raise ShapeError("cross_entropy: empty batch")
        if y.min() < 0 or y.max() >= vl.shape[1]:
            raise ShapeError(f"cross_entropy: label out of range [0, {vl.shape[1]})")
        z = vl - vl.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1))
        n = vl.shape[0]
        out = np.asarray(-(z[np.arange(n), y] - lse).mean())
        probs = np.exp(z - lse[:, None])

        def vjp(g: np.ndarray):
            gl = probs.copy()
            gl[np.arange(n), y] -= 1.0
            return (gl * (g / n),)

        return self._record(out, (logits,), vjp)

    def bce_logits(self, scores: Ref, labels: np.ndarray) -> Ref:
        """Mean binary cross-entropy on raw scores; labels are constant 0/1."""
        vs = self._values[scores]
        y = np.asarray(labels, dtype=np.float64)
        if vs.ndim != 1 or y.shape != vs.shape:
            raise ShapeError(
                f"bce_logits: scores shape {vs.shape} and labels shape {y.shape} must be equal 1-D"
            )
        if vs.size == 0:
            raise ShapeError("bce_logits: empty batch")
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ShapeError("bce_logits: labels must be 0 or 1")
        # max(x,0) - x*y + log(1 + exp(-|x|)) is stable for large |x|
        per = np.maximum(vs, 0.0) - vs * y + np.log1p(np.exp(-np.abs(vs)))
        n = vs.size
        out = np.asarray(per.mean())
        sig = 1.0 / (1.0 + np.exp(-vs))

        def vjp(g: np.ndarray):
            return ((sig - y) * (g / n),)

        return self._record(out, (scores,), vjp)

    # -- reverse pass -------------------------------------------------------

    def backward(self, loss: Ref) -> None:
        """Accumulate adjoints of every node w.r.t. a scalar ``loss``."""
        lv = self._values[loss]
        if lv.ndim != 0:
            raise ShapeError(f"backward requires a 0-d scalar loss, got shape {lv.shape}")
        grads: list[np.ndarray | None] = [None] * len(self._values)
        grads[loss] = np.asarray(1.0)
        for i in range(loss, -1, -1):
            g = grads[i]
            if g is None or self._vjps[i] is None:
                continue
            parent_grads = self._vjps[i](g)
            for p, pg in zip(self._parents[i], parent_grads):
                if grads[p] is None:
                    grads[p] = np.array(pg, dtype=np.float64, copy=True)
                else:
                    grads[p] += pg
        self._grads = grads

    def grad(self, ref: Ref) -> np.ndarray:
        """Adjoint of ``ref`` from the last backward pass (zeros if unused)."""
        if self._grads is None:
            raise ShapeError("grad() called before backward()")
        g = self._grads[ref]
        if g is None:
            return np.zeros_like(self._values[ref])
        return g


def finite_difference(
    fn: Callable[[np.ndarray], float], x, step: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient oracle for a scalar function of a vector.

    Evaluates ``fn`` at ``x +- step * e_i`` for every coordinate. Raises if
    the step is not positive or any evaluation is non-finite.
    """
    if not step > 0:
        raise ShapeError(f"finite_difference: step must be positive, got {step}")
    x = np.asarray(x, dtype=np.float64).copy()
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(fn(x))
        flat[i] = orig - step
        lo = float(fn(x))
        flat[i] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ShapeError(
                f"finite_difference: non-finite evaluation at coordinate {i}"
            )
        grad[i] = (hi - lo) / (2.0 * step)
    return grad.reshape(x.shape)


def pack_params(params: dict[str, np.ndarray]) -> np.ndarray:
    """Flatten a name->array dict into one vector (sorted by name)."""
    if not params:
        return np.zeros(0, dtype=np.float64)
    return np.concatenate([params[k].reshape(-1) for k in sorted(params)])


def unpack_params(
    vector: np.ndarray, template: dict[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """Inverse of :func:`pack_params` against a shape template."""
    out: dict[str, np.ndarray] = {}
    pos = 0
    vector = np.asarray(vector, dtype=np.float64)
    for k in sorted(template):
        size = template[k].size
        out[k] = vector[pos : pos + size].reshape(template[k].shape).copy()
        pos += size
    if pos != vector.size:
        raise ShapeError(
            f"unpack_params: vector has {vector.size} entries, template needs {pos}"
        )
    return out
