"""Exception hierarchy with stable, machine-parsable error codes.

Every public failure mode maps to a subclass carrying a short ``code``
string. The CLI prints ``<code>: <message>`` on a single line and exits
nonzero, so scripts can dispatch on the first token.
"""

from __future__ import annotations


class MultigraphError(Exception):
    """Base class for all errors raised by this package."""

    code = "E_RUNTIME"


class ConfigError(MultigraphError):
    """Invalid configuration value, flag, or config-file key."""

    code = "E_CONFIG"


class DataError(MultigraphError):
    """Malformed dataset directory or file contents."""

    code = "E_DATA"


class ShapeError(MultigraphError):
    """Operands with incompatible shapes passed to a numeric op."""

    code = "E_SHAPE"


class ArtifactError(MultigraphError):
    """Artifact file violates its schema or version contract."""

    code = "E_ARTIFACT"


class DivergenceError(MultigraphError):
    """Training loss became non-finite or exploded."""

    code = "E_DIVERGE"

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class NotFittedError(MultigraphError):
    """Estimator method that requires fit() was called before fit()."""

    code = "E_NOT_FITTED"
