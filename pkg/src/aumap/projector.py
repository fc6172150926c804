"""Out-of-sample projection by inverse-distance weighting of neighbor projections.

A new point is placed at the weighted mean of the existing projections of
its k nearest training inputs, each weighted by the reciprocal of its
input-space distance (weights normalized to sum to one).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray

from .core import (
    AumapError,
    KTooLarge,
    ProjectorConfig,
    ReferenceEmbedding,
    as_matrix,
    as_point,
    validate_embedding,
)
from .knn import KnnIndex, NeighborSet, build_index


def idw_weights(distances: NDArray[np.float64], epsilon: float) -> NDArray[np.float64]:
    """Normalized inverse-distance weights for ascending ``distances``.

    Neighbors at distance <= ``epsilon`` share all the weight equally
    (the limit of 1/d weighting as those distances shrink to zero).
    Otherwise weights are computed as ``(d_min / d_i) / sum_j (d_min / d_j)``,
    algebraically equal to ``(1/d_i) / sum_j (1/d_j)`` but safe from
    overflow when ``d_min`` is tiny.
    """
    zero = distances <= epsilon
    if zero.any():
        return zero / np.count_nonzero(zero)
    ratios = distances.min() / distances
    return ratios / ratios.sum()


class Projector:
    """A fitted projector: reference embedding, neighbor index and config.

    Immutable after :func:`fit`; all projection methods are pure and safe
    to call concurrently.
    """

    def __init__(self, embedding: ReferenceEmbedding, index: KnnIndex, config: ProjectorConfig):
        self.embedding = embedding
        self.index = index
        self.config = config

    @property
    def dim(self) -> int:
        return self.embedding.dim

    @property
    def out_dim(self) -> int:
        return self.embedding.out_dim

    def _combine(self, neighbors: NeighborSet) -> NDArray[np.float64]:
        w = idw_weights(neighbors.distances, self.config.zero_distance_epsilon)
        return w @ self.embedding.projections[neighbors.indices]

    def neighbor_weights(self, x) -> tuple[NeighborSet, NDArray[np.float64]]:
        """Neighbors of ``x`` and the weights applied to their projections."""
        nb = self.index.query(x, self.config.k)
        return nb, idw_weights(nb.distances, self.config.zero_distance_epsilon)

    def project_point(self, x) -> NDArray[np.float64]:
        x = as_point(x, self.dim)
        return self._combine(self.index.query(x, self.config.k))

    def project_batch(self, xs, workers: int | None = None) -> NDArray[np.float64]:
        """Project every row of ``xs``; row i equals ``project_point(xs[i])``.

        ``workers > 1`` splits the rows across threads. Output does not
        depend on the split.
        """
        rows = _validate_rows(xs, self.dim)
        if rows.shape[0] == 0:
            return np.empty((0, self.out_dim))
        if workers and workers > 1 and rows.shape[0] > 1:
            chunks = np.array_split(rows, min(workers, rows.shape[0]))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(self._project_rows, chunks))
            return np.vstack(parts)
        return self._project_rows(rows)

    def _project_rows(self, rows):
        neighbor_sets = self.index.query_batch(rows, self.config.k)
        out = np.empty((rows.shape[0], self.out_dim))
        for i, nb in enumerate(neighbor_sets):
            out[i] = self._combine(nb)
        return out


def _validate_rows(xs, dim: int) -> NDArray[np.float64]:
    if isinstance(xs, np.ndarray) and xs.ndim == 2:
        rows = xs.astype(np.float64, copy=False)
        if rows.shape[0] and rows.shape[1] != dim:
            _raise_at(0, rows[0], dim)
        if not np.all(np.isfinite(rows)):
            first = int(np.flatnonzero(~np.isfinite(rows).all(axis=1))[0])
            _raise_at(first, rows[first], dim)
        return rows
    points = list(xs)
    if not points:
        return np.empty((0, dim))
    for i, x in enumerate(points):
        try:
            as_point(x, dim)
        except AumapError as exc:
            raise _annotated(exc, i) from exc
    return as_matrix(points, "points")


def _raise_at(position, x, dim):
    try:
        as_point(x, dim)
    except AumapError as exc:
        raise _annotated(exc, position) from exc


def _annotated(exc: AumapError, position: int) -> AumapError:
    err = type(exc)(f"point {position}: {exc}")
    err.position = position
    return err


def fit(embedding: ReferenceEmbedding, config: ProjectorConfig | None = None,
        backend: str | None = None) -> Projector:
    """Build the neighbor index over ``embedding.inputs``."""
    config = config or ProjectorConfig()
    validate_embedding(embedding)
    if config.k > embedding.n:
        raise KTooLarge(f"k={config.k} exceeds the {embedding.n} reference points")
    index = build_index(embedding.inputs, config.strategy, backend=backend)
    return Projector(embedding, index, config)


def project_point(projector: Projector, x) -> NDArray[np.float64]:
    return projector.project_point(x)


def project_batch(projector: Projector, xs, workers: int | None = None) -> NDArray[np.float64]:
    return projector.project_batch(xs, workers=workers)
