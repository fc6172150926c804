"""Exact Euclidean k-nearest-neighbor search.

Three strategies answer the same question and must agree exactly:

``brute_force``
    Distances to every reference point, full sort. Kept as the oracle.
``kd_tree``
    :class:`scipy.spatial.cKDTree` proposes candidates, which are then
    re-scored with the same distance routine as ``brute_force``.
``matmul``
    One matrix product screens all references at once; every point whose
    screened squared distance could, under a rigorous error bound, fall
    inside the k-th neighbor radius is re-scored exactly. When the
    references are losslessly representable as power-of-two scaled int8,
    the screen multiplies those integer codes (``torch._int_mm``, or float32
    while partial sums stay below 2**24 so accumulation is still exact);
    otherwise it runs in float32 with a rounding-error bound. This is the fast path for high-dimensional inputs, where
    trees degenerate to a linear scan with extra overhead.

Ties at equal distance are broken by ascending reference index in every
strategy, so results are deterministic and comparable bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from .core import (
    DimensionMismatch,
    EmptyInput,
    KTooLarge,
    as_matrix,
    as_point,
    check_finite,
)

STRATEGIES = ("brute_force", "kd_tree", "matmul")

# Above this input dimensionality "auto" stops using the tree.
KD_TREE_MAX_DIM = 16

_F32_UNIT = 2.0**-24
_F64_UNIT = 2.0**-53


@dataclass(frozen=True, eq=False)
class NeighborSet:
    """k (index, distance) pairs sorted by distance, then by index."""

    indices: NDArray[np.int64]
    distances: NDArray[np.float64]

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(zip(self.indices.tolist(), self.distances.tolist()))

    def __eq__(self, other):
        if not isinstance(other, NeighborSet):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.distances, other.distances
        )

    __hash__ = None


def exact_distances(rows: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Euclidean distance from ``x`` to every row of ``rows``.

    Every strategy scores its final candidates through this function so
    that distances are bitwise comparable across strategies.
    """
    diff = rows - x
    return np.sqrt(np.square(diff).sum(axis=1))


def _select(candidates: NDArray[np.int64], dists: NDArray[np.float64], k: int) -> NeighborSet:
    order = np.lexsort((candidates, dists))[:k]
    return NeighborSet(candidates[order].astype(np.int64), dists[order])


def _resolve_backend(backend: str | None) -> str:
    if backend is None:
        backend = os.environ.get("AUMAP_MATMUL_BACKEND", "auto")
    if backend == "auto":
        try:
            import torch  # noqa: F401
        except ImportError:
            return "numpy"
        return "torch"
    if backend not in ("torch", "numpy"):
        raise ValueError(f"unknown matmul backend {backend!r}")
    return backend


def _pow2_scale(max_abs: NDArray[np.float64]) -> NDArray[np.float64]:
    """Smallest power of two ``s`` with ``max_abs / s <= 127`` (1 for zero rows)."""
    safe = np.where(max_abs > 0, max_abs, 1.0)
    scale = np.exp2(np.ceil(np.log2(safe / 127.0)))
    # log2 rounding can land one step low
    scale = np.where(safe / scale > 127.0, scale * 2.0, scale)
    return np.where(max_abs > 0, np.maximum(scale, 2.0**-1000), 1.0)


def quantize_int8(rows: NDArray[np.float64]):
    """Power-of-two scaled int8 codes of each row, with exact residual norms.

    Dividing by a power of two is exact, so integer or dyadic data with
    small magnitude quantize losslessly (zero residual).
    """
    scale = _pow2_scale(np.abs(rows).max(axis=1))
    codes = np.clip(np.rint(rows / scale[:, None]), -127, 127)
    decoded = codes * scale[:, None]
    resid = np.sqrt(np.square(rows - decoded).sum(axis=1))
    return codes.astype(np.int8), scale, decoded, resid


def _int_mm_available() -> bool:
    try:
        import torch

        a = torch.ones((32, 8), dtype=torch.int8)
        b = torch.ones((8, 8), dtype=torch.int8)
        return int(torch._int_mm(a, b)[0, 0]) == 8
    except Exception:
        return False


def _int8_tensor(arr):
    """Copy into a torch tensor with canonical row-major strides.

    numpy leaves arbitrary strides on size-1 axes and ``torch._int_mm``
    reads such inputs incorrectly.
    """
    import torch

    out = torch.empty(arr.shape, dtype=torch.int8)
    out.copy_(torch.from_numpy(np.ascontiguousarray(arr)))
    return out


class KnnIndex:
    """Immutable exact kNN index over a fixed set of reference points.

    Build with :func:`build_index`. Queries are read-only and may run
    concurrently from several threads.
    """

    def __init__(self, points: NDArray[np.float64], strategy: str, backend: str | None = None):
        self.points = points
        self.strategy = strategy
        self.backend = None
        self.screen = None
        if strategy == "kd_tree":
            self._tree = cKDTree(points, copy_data=False)
        elif strategy == "matmul":
            self._prepare_matmul(_resolve_backend(backend))

    def _prepare_matmul(self, backend):
        points = self.points
        self.backend = backend
        self._sq_norms = np.square(points).sum(axis=1)
        self._norms = np.sqrt(self._sq_norms)
        self._max_norm = float(self._norms.max())
        codes, scale, decoded, resid = quantize_int8(points)
        if not resid.any():
            self._code_scale = scale
            self._max_decoded_norm = float(np.sqrt(np.square(decoded).sum(axis=1)).max())
            # int32 accumulation of 127*127 products stays exact below this
            if backend == "torch" and points.shape[1] < 130_000 and _int_mm_available():
                self.screen = "int8"
                self._codes_t = _int8_tensor(codes.T)
                return
            # float32 sums of integers stay exact while every partial sum is below 2**24
            l1 = int(np.abs(codes.astype(np.int64)).sum(axis=1).max())
            if 127 * l1 < 2**24:
                self.screen = "int8_f32"
                self._codes32 = np.ascontiguousarray(codes, dtype=np.float32)
                if backend == "torch":
                    import torch

                    self._codes32 = torch.from_numpy(self._codes32)
                return
        if backend == "torch":
            import torch

            self._points32 = torch.from_numpy(np.ascontiguousarray(points, dtype=np.float32))
        else:
            self._points32 = np.ascontiguousarray(points, dtype=np.float32)
        self.screen = "float32"

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def _check_k(self, k: int) -> int:
        if int(k) != k or k < 1:
            raise ValueError(f"k must be a positive integer, got {k!r}")
        if k > self.n:
            raise KTooLarge(f"k={k} exceeds the {self.n} indexed points")
        return int(k)

    def query(self, x, k: int) -> NeighborSet:
        """The ``k`` indexed points closest to ``x``."""
        k = self._check_k(k)
        x = as_point(x, self.dim)
        if self.strategy == "brute_force":
            return _select(np.arange(self.n), exact_distances(self.points, x), k)
        if self.strategy == "kd_tree":
            return self._query_tree(x, k)
        return self._query_matmul(x[None, :], k)[0]

    def query_batch(self, xs, k: int) -> list[NeighborSet]:
        """Query every row of ``xs``; identical to calling :meth:`query` per row."""
        k = self._check_k(k)
        xs = as_matrix(xs, "queries")
        if xs.shape[0] == 0:
            return []
        if xs.shape[1] != self.dim:
            raise DimensionMismatch(f"queries have dimension {xs.shape[1]}, expected {self.dim}")
        check_finite(xs, "queries")
        if self.strategy == "matmul":
            return self._query_matmul(xs, k)
        return [self.query(x, k) for x in xs]

    def _query_tree(self, x, k):
        tree_d, _ = self._tree.query(x, k=k)
        radius = float(np.max(tree_d))
        # slack covers the tree's own rounding; exact re-scoring decides
        radius = radius * (1.0 + 1e-8) + 1e-300
        candidates = np.asarray(self._tree.query_ball_point(x, radius), dtype=np.int64)
        return _select(candidates, exact_distances(self.points[candidates], x), k)

    def _screen_dots(self, xs, x_norm):
        """Approximate ``xs @ points.T`` and a bound on its absolute error.

        The bound has shape ``(b, n)`` or ``(b, 1)``.
        """
        if self.screen in ("int8", "int8_f32"):
            codes, scale, decoded, resid = quantize_int8(xs)
            if self.screen == "int8":
                import torch

                prod = torch._int_mm(_int8_tensor(codes), self._codes_t).numpy()
            elif self.backend == "torch":
                import torch

                prod = (torch.from_numpy(codes.astype(np.float32)) @ self._codes32.T).numpy()
            else:
                prod = codes.astype(np.float32) @ self._codes32.T
            dots = prod.astype(np.float64) * (scale[:, None] * self._code_scale[None, :])
            # reference side is lossless; only the query residual contributes
            return dots, (resid * self._max_decoded_norm)[:, None]
        xs32 = np.ascontiguousarray(xs, dtype=np.float32)
        if self.backend == "torch":
            import torch

            dots = (torch.from_numpy(xs32) @ self._points32.T).numpy()
        else:
            dots = xs32 @ self._points32.T
        dim = self.dim
        gamma = dim * _F32_UNIT / (1.0 - dim * _F32_UNIT)
        # input rounding to float32 plus accumulation, with a 2x margin
        rel = 2.0 * (2.0 * _F32_UNIT + _F32_UNIT**2 + gamma * (1.0 + _F32_UNIT) ** 2)
        return dots.astype(np.float64), rel * x_norm[:, None] * self._norms[None, :]

    def _query_matmul(self, xs, k):
        x_sq = np.square(xs).sum(axis=1)
        x_norm = np.sqrt(x_sq)
        dots, dot_err = self._screen_dots(xs, x_norm)
        approx = dots
        approx *= -2.0
        approx += self._sq_norms[None, :]
        approx += x_sq[:, None]
        # float64 rounding in the norms and in assembling ``approx``
        assembly = (self.dim + 8) * _F64_UNIT * np.square(x_norm + self._max_norm)[:, None]
        # the floor covers products that underflow for extremely small inputs
        bound = 2.0 * dot_err + assembly + 1e-300
        if bound.shape[1] == 1:
            kth = np.partition(approx, k - 1, axis=1)[:, k - 1 : k] + bound
        else:
            kth = np.partition(approx + bound, k - 1, axis=1)[:, k - 1 : k]
        keep = approx - bound <= kth
        result = []
        for row in range(xs.shape[0]):
            candidates = np.flatnonzero(keep[row])
            dists = exact_distances(self.points[candidates], xs[row])
            result.append(_select(candidates, dists, k))
        return result


def resolve_strategy(strategy: str, dim: int) -> str:
    if strategy == "auto":
        return "kd_tree" if dim <= KD_TREE_MAX_DIM else "matmul"
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES + ('auto',)}")
    return strategy


def build_index(points, strategy: str = "kd_tree", backend: str | None = None) -> KnnIndex:
    """Build an exact kNN index over ``points`` (shape ``(n, d)``).

    ``backend`` only affects the ``matmul`` strategy: ``"torch"``,
    ``"numpy"`` or ``None`` for torch-if-installed.
    """
    pts = as_matrix(points, "points")
    if pts.shape[0] == 0:
        raise EmptyInput("cannot index an empty point set")
    if pts.shape[1] == 0:
        raise DimensionMismatch("points must have dimension >= 1")
    check_finite(pts, "points")
    pts = np.array(pts, dtype=np.float64, order="C", copy=True)
    pts.flags.writeable = False
    return KnnIndex(pts, resolve_strategy(strategy, pts.shape[1]), backend)


def query(index: KnnIndex, x, k: int) -> NeighborSet:
    return index.query(x, k)
