"""CSV formats, fixtures and the seeded multiclass Poisson generator.

File layout
-----------
Inputs / datasets: headered CSV with columns ``x0..x{D-1}`` and an optional
trailing ``label`` column. Projections: columns ``u0..u{m-1}``. Values are
written with 17 significant digits, which round-trips every finite double.

Poisson generator
-----------------
Random numbers come from xoshiro256** seeded by four successive outputs of
splitmix64 started at ``seed``. A uniform double is ``(next() >> 11) * 2**-53``.
Draw order: first the class rate matrix, row-major over (class, feature),
each ``rate_low + (rate_high - rate_low) * U``; then samples class by
class, sample by sample, feature by feature, each by Knuth's
product-of-uniforms method (count multiplications until the running
product drops to ``exp(-rate)`` or below).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np
from numpy.typing import NDArray

from .core import (  # noqa: F401 - ReferenceEmbedding re-exported for scripts
    CountMismatch,
    DimensionMismatch,
    ParseError,
    ReferenceEmbedding,
    check_finite,
)

def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


_FILE_MODE = 0o666 & ~_umask()

# Knuth's method is O(rate) per draw and exp(-rate) underflows past ~745.
MAX_RATE = 700.0


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    samples: NDArray[np.float64]
    labels: NDArray[np.int64] | None = None
    class_count: int | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise DimensionMismatch("samples must be a 2-D array")
        object.__setattr__(self, "samples", samples)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (samples.shape[0],):
                raise CountMismatch(f"{labels.shape[0]} labels for {samples.shape[0]} samples")
            if labels.size and labels.min() < 0:
                raise ParseError("labels must be non-negative")
            count = self.class_count
            if count is None:
                count = int(labels.max()) + 1 if labels.size else 0
            elif labels.size and labels.max() >= count:
                raise ParseError(f"label {labels.max()} out of range for {count} classes")
            object.__setattr__(self, "labels", labels)
            object.__setattr__(self, "class_count", int(count))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def content_hash(self) -> str:
        h = hashlib.sha256(np.ascontiguousarray(self.samples).tobytes())
        if self.labels is not None:
            h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class PoissonSpec:
    class_count: int
    dim: int
    samples_per_class: int
    rate_low: float = 1.0
    rate_high: float = 10.0
    seed: int = 0

    def __post_init__(self):
        for name in ("class_count", "dim", "samples_per_class"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not (0 < self.rate_low <= self.rate_high <= MAX_RATE):
            raise ValueError(
                f"need 0 < rate_low <= rate_high <= {MAX_RATE}, "
                f"got {self.rate_low}, {self.rate_high}"
            )
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")


# --- xoshiro256** -----------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(cache=True)
def _seed_state(seed):
    state = np.empty(4, dtype=np.uint64)
    z = seed
    for i in range(4):
        z = z + _GOLDEN
        t = z
        t = (t ^ (t >> np.uint64(30))) * _MIX1
        t = (t ^ (t >> np.uint64(27))) * _MIX2
        state[i] = t ^ (t >> np.uint64(31))
    return state


@numba.njit(cache=True)
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@numba.njit(cache=True)
def _uniform(s):
    return float(_next(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _generate(seed, n_classes, dim, per_class, low, high):
    s = _seed_state(seed)
    rates = np.empty((n_classes, dim))
    for c in range(n_classes):
        for j in range(dim):
            rates[c, j] = low + (high - low) * _uniform(s)
    out = np.empty((n_classes * per_class, dim))
    row = 0
    for c in range(n_classes):
        for _ in range(per_class):
            for j in range(dim):
                limit = np.exp(-rates[c, j])
                k = 0
                p = _uniform(s)
                while p > limit:
                    k += 1
                    p *= _uniform(s)
                out[row, j] = k
            row += 1
    return rates, out


@numba.njit(cache=True)
def _draw_uniforms(seed, count):
    s = _seed_state(seed)
    out = np.empty(count)
    for i in range(count):
        out[i] = _uniform(s)
    return out


@numba.njit(cache=True)
def _draw_raw(seed, count):
    s = _seed_state(seed)
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = _next(s)
    return out


def xoshiro_uniforms(seed: int, count: int) -> NDArray[np.float64]:
    """First ``count`` uniforms of the generator stream."""
    return _draw_uniforms(np.uint64(seed), count)


def xoshiro_raw(seed: int, count: int) -> list[int]:
    """First ``count`` raw 64-bit outputs after splitmix64 seeding."""
    return [int(v) for v in _draw_raw(np.uint64(seed), count)]


def generate_poisson(spec: PoissonSpec, return_rates: bool = False):
    """Seeded multiclass Poisson dataset, rows grouped by class."""
    rates, samples = _generate(
        np.uint64(spec.seed),
        spec.class_count,
        spec.dim,
        spec.samples_per_class,
        float(spec.rate_low),
        float(spec.rate_high),
    )
    labels = np.repeat(np.arange(spec.class_count), spec.samples_per_class)
    ds = LabeledDataset(samples, labels, spec.class_count)
    return (ds, rates) if return_rates else ds


def interleave_classes(ds: LabeledDataset) -> LabeledDataset:
    """Reorder rows round-robin by class so every prefix is class-balanced."""
    if ds.labels is None:
        return ds
    rank = np.empty(ds.n, dtype=np.int64)
    for c in np.unique(ds.labels):
        members = np.flatnonzero(ds.labels == c)
        rank[members] = np.arange(members.size)
    order = np.lexsort((ds.labels, rank))
    return LabeledDataset(ds.samples[order], ds.labels[order], ds.class_count)


# --- CSV ---------------------------------------------------------------------


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file beside ``path`` and rename it into place on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None,
                       **({} if "b" in mode else {"encoding": "utf-8"})) as fh:
            yield fh
        os.chmod(tmp, _FILE_MODE)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_number(value: float) -> str:
    return "%.17g" % value


def write_matrix_csv(fh, matrix: NDArray, prefix: str, labels=None) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    check_finite(matrix, "matrix")
    header = [f"{prefix}{j}" for j in range(matrix.shape[1])]
    if labels is not None:
        header.append("label")
    fh.write(",".join(header) + "\n")
    lines = []
    for i, row in enumerate(matrix.tolist()):
        cells = ["%.17g" % v for v in row]
        if labels is not None:
            cells.append(str(int(labels[i])))
        lines.append(",".join(cells))
    if lines:
        fh.write("\n".join(lines) + "\n")


def _write_csv(path, matrix, prefix, labels=None):
    if str(path) == "-":
        import sys

        write_matrix_csv(sys.stdout, matrix, prefix, labels)
        return
    with atomic_write(path) as fh:
        write_matrix_csv(fh, matrix, prefix, labels)


def _read_csv(path, prefix: str, allow_label: bool):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError(f"{path}: empty file, expected a header row")
    header = [h.strip() for h in rows[0]]
    has_label = allow_label and header and header[-1] == "label"
    value_cols = header[:-1] if has_label else header
    expected = [f"{prefix}{j}" for j in range(len(value_cols))]
    if not value_cols or value_cols != expected:
        raise ParseError(
            f"{path}:1: header must be {prefix}0..{prefix}<n-1>"
            + (" with optional trailing 'label'" if allow_label else "")
        )
    body = rows[1:]
    width = len(header)
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise ParseError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
    if not body:
        return np.empty((0, len(value_cols))), (np.empty(0, dtype=np.int64) if has_label else None)
    cells = np.array(body, dtype=str)
    try:
        values = cells.astype(np.float64)
    except ValueError:
        for lineno, row in enumerate(body, start=2):
            for col, cell in enumerate(row):
                try:
                    float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: column {header[col]!r}: cannot parse {cell!r} as a number"
                    ) from None
        raise
    labels = None
    if has_label:
        raw = values[:, -1]
        values = values[:, :-1]
        bad = ~np.isfinite(raw) | (raw != np.round(raw)) | (raw < 0)
        if bad.any():
            lineno = int(np.flatnonzero(bad)[0]) + 2
            raise ParseError(f"{path}:{lineno}: column 'label': expected a non-negative integer")
        labels = raw.astype(np.int64)
    return values, labels


def save_embedding(embedding: ReferenceEmbedding, path_inputs, path_projections) -> None:
    _write_csv(path_inputs, embedding.inputs, "x", embedding.labels)
    _write_csv(path_projections, embedding.projections, "u")


def load_embedding(path_inputs, path_projections) -> ReferenceEmbedding:
    inputs, labels = _read_csv(path_inputs, "x", allow_label=True)
    projections, _ = _read_csv(path_projections, "u", allow_label=False)
    if inputs.shape[0] != projections.shape[0]:
        raise CountMismatch(
            f"{path_inputs} has {inputs.shape[0]} rows but {path_projections} has {projections.shape[0]}"
        )
    return ReferenceEmbedding(inputs, projections, labels)


def save_dataset(ds: LabeledDataset, path) -> None:
    _write_csv(path, ds.samples, "x", ds.labels)


def load_dataset(path) -> LabeledDataset:
    samples, labels = _read_csv(path, "x", allow_label=True)
    check_finite(samples, str(path))
    return LabeledDataset(samples, labels)


def save_projections(projections, path) -> None:
    _write_csv(path, projections, "u")


def load_projections(path) -> NDArray[np.float64]:
    values, _ = _read_csv(path, "u", allow_label=False)
    check_finite(values, str(path))
    return values


# --- fixtures ----------------------------------------------------------------

FIXTURE_FILES = {
    "train_inputs": "train_x.csv",
    "train_projections": "train_u.csv",
    "test_inputs": "test_x.csv",
    "test_projections": "test_u.csv",
}


@dataclass
class FixtureManifest:
    """Provenance of a committed fixture set."""

    dataset: str
    n_total: int
    n_train: int
    n_test: int
    dim: int
    out_dim: int
    class_count: int
    split_seed: int
    test_fraction: float
    umap_params: dict = field(default_factory=dict)
    knn_k: int = 15
    tool_versions: dict = field(default_factory=dict)
    files: dict = field(default_factory=lambda: dict(FIXTURE_FILES))

    def write(self, path) -> None:
        with atomic_write(path) as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "FixtureManifest":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass
class Fixture:
    manifest: FixtureManifest
    train: ReferenceEmbedding
    test: LabeledDataset
    test_oracle: NDArray[np.float64]


def load_fixture(directory) -> Fixture:
    """Load a fixture directory written by ``scripts/make_fixtures.py``."""
    directory = Path(directory)
    manifest = FixtureManifest.read(directory / "manifest.json")
    files = manifest.files
    train = load_embedding(directory / files["train_inputs"], directory / files["train_projections"])
    test = load_dataset(directory / files["test_inputs"])
    oracle = load_projections(directory / files["test_projections"])
    if oracle.shape[0] != test.n:
        raise CountMismatch(f"{test.n} test inputs but {oracle.shape[0]} oracle projections")
    return Fixture(manifest, train, test, oracle)
