"""Input-validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigError, NotFittedError, ShapeError

TASKS = ("classification", "recommendation")
MODES = ("partial", "one_path", "full")


def check_task(task: str) -> str:
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    return task


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ConfigError(f"unknown search mode {mode!r}; expected one of {MODES}")
    return mode


def check_positive_int(value: Any, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_fraction(value: Any, name: str, closed: bool = True) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    lo_ok = out >= 0.0
    hi_ok = out <= 1.0 if closed else out < 1.0
    if not (np.isfinite(out) and lo_ok and hi_ok):
        raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
    return out


def check_seed(value: Any, name: str = "seed") -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
    if value < 0:
        raise ConfigError(f"{name} must be non-negative, got {value}")
    return int(value)


def check_index_array(values: Iterable[Any], name: str, upper: int) -> np.ndarray:
    """Coerce to a 1-D int64 index array and bound-check against [0, upper)."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ConfigError(f"{name} must contain integers")
    arr = arr.astype(np.int64, copy=False)
    if arr.size and (arr.min() < 0 or arr.max() >= upper):
        raise ConfigError(
            f"{name} contains indices outside [0, {upper}): "
            f"min={arr.min()}, max={arr.max()}"
        )
    return arr


def check_fitted(estimator: Any, attributes: Sequence[str]) -> None:
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first "
            f"(missing {', '.join(missing)})"
        )


def check_finite(array: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise ShapeError(f"{name} contains non-finite entries")
    return array
