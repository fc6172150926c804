"""Shared types, errors and validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

Metric = Literal["euclidean"]


class AumapError(ValueError):
    """Base class for expected, user-facing failures.

    ``code`` is a stable snake_case identifier used by the CLI and the
    stream server's wire format.
    """

    code = "internal"


class DimensionMismatch(AumapError):
    code = "dimension_mismatch"


class CountMismatch(AumapError):
    code = "count_mismatch"


class NonFiniteValue(AumapError):
    code = "non_finite_value"


class EmptyEmbedding(AumapError):
    code = "empty_embedding"


class EmptyInput(AumapError):
    code = "empty_input"


class KTooLarge(AumapError):
    code = "k_too_large"


class ParseError(AumapError):
    code = "parse_error"


class DegenerateOracle(AumapError):
    code = "degenerate_oracle"


class UnsupportedDimensionality(AumapError):
    code = "unsupported_dimensionality"


def as_matrix(values, name: str = "array") -> NDArray[np.float64]:
    """Coerce ``values`` to a 2-D float64 array without validating contents."""
    try:
        arr = np.asarray(values, dtype=np.float64)
    except ValueError as exc:
        # ragged nested sequences land here
        raise DimensionMismatch(f"{name}: rows have differing lengths") from exc
    if arr.ndim == 1 and arr.size == 0:
        return arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name}: expected a 2-D array, got ndim={arr.ndim}")
    return arr


def as_point(x, dim: int | None = None) -> NDArray[np.float64]:
    """Validate a single point: 1-D, finite, of length ``dim`` if given."""
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise DimensionMismatch("point is not a flat numeric sequence") from exc
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"point must be a non-empty 1-D sequence, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise DimensionMismatch(f"point has dimension {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("point contains NaN or infinity")
    return arr


def check_finite(arr: NDArray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteValue(f"{name}: non-finite value at {tuple(int(i) for i in bad)}")


def _frozen(arr: NDArray) -> NDArray:
    arr = np.array(arr, dtype=np.float64, copy=True, order="C")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ReferenceEmbedding:
    """Training inputs paired row-by-row with their low-dimensional projections.

    Arrays are copied and made read-only on construction. Construction
    validates; use :func:`validate_embedding` to re-check an instance.
    """

    inputs: NDArray[np.float64]
    projections: NDArray[np.float64]
    labels: NDArray[np.int64] | None = field(default=None)

    def __post_init__(self):
        inputs = as_matrix(self.inputs, "inputs")
        projections = as_matrix(self.projections, "projections")
        object.__setattr__(self, "inputs", _frozen(inputs))
        object.__setattr__(self, "projections", _frozen(projections))
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64, copy=True)
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)
        validate_embedding(self)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def out_dim(self) -> int:
        return self.projections.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ReferenceEmbedding):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None
            and other.labels is not None
            and np.array_equal(self.labels, other.labels)
        )
        return (
            self.inputs.shape == other.inputs.shape
            and self.projections.shape == other.projections.shape
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.projections, other.projections)
            and same_labels
        )

    __hash__ = None


def validate_embedding(embedding: ReferenceEmbedding) -> None:
    """Raise if ``embedding`` violates any ReferenceEmbedding invariant."""
    inputs, projections = embedding.inputs, embedding.projections
    if inputs.ndim != 2 or projections.ndim != 2:
        raise DimensionMismatch("inputs and projections must be 2-D")
    if inputs.shape[0] != projections.shape[0]:
        raise CountMismatch(
            f"{inputs.shape[0]} inputs but {projections.shape[0]} projections"
        )
    if inputs.shape[0] == 0:
        raise EmptyEmbedding("embedding has no points")
    if inputs.shape[1] < 1 or projections.shape[1] < 1:
        raise DimensionMismatch("input and projection dimensionality must be >= 1")
    check_finite(inputs, "inputs")
    check_finite(projections, "projections")
    labels = embedding.labels
    if labels is not None and labels.shape != (inputs.shape[0],):
        raise CountMismatch(f"{labels.shape[0]} labels for {inputs.shape[0]} points")


@dataclass(frozen=True)
class ProjectorConfig:
    """Projection settings.

    ``strategy`` selects the neighbor search backend; ``"auto"`` uses a
    kd-tree for low-dimensional inputs and the screened matrix-product
    scan otherwise (see :mod:`aumap.knn`).
    """

    k: int = 15
    metric: Metric = "euclidean"
    zero_distance_epsilon: float = 1e-12
    strategy: str = "auto"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if self.metric != "euclidean":
            raise ValueError(f"unsupported metric {self.metric!r}")
        if not (self.zero_distance_epsilon >= 0):
            raise ValueError("zero_distance_epsilon must be >= 0")
