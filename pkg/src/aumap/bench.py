"""Wall-clock benchmarks for fitting and projecting on mock Poisson data.

Training time here is the cost of building the projector (embedding
assembly plus neighbor index). The UMAP fit that produces a real reference
embedding is not part of this package and is not timed.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from .core import EmptyInput, ProjectorConfig, ReferenceEmbedding
from .dataio import PoissonSpec, format_number, generate_poisson, interleave_classes
from .projector import Projector, fit

Vary = Literal["dimensionality", "sample_count"]

DEFAULT_FIXED = {"dimensionality": 5000, "sample_count": 1000}

FIT_NOTE = (
    "fit time covers embedding assembly and neighbor-index construction only; "
    "the upstream UMAP optimisation is not timed"
)
WARMUP_NOTE = "one untimed warm-up repetition precedes the timed repetitions"


class TimeSummary(NamedTuple):
    mean: float
    std: float
    excluded: int
    unstable: bool = False


def summarize_times(samples) -> TimeSummary:
    """Mean and population std after one pass of 2-sigma outlier exclusion.

    Fewer than three samples are never trimmed. If the rule would drop more
    than half the samples, nothing is dropped and ``unstable`` is set.
    """
    t = np.asarray(samples, dtype=np.float64)
    if t.size == 0:
        raise EmptyInput("no timing samples")
    mean, std = float(t.mean()), float(t.std())
    if t.size < 3:
        return TimeSummary(mean, std, 0)
    keep = np.abs(t - mean) <= 2.0 * std
    excluded = int(t.size - keep.sum())
    if excluded > t.size // 2:
        return TimeSummary(mean, std, 0, True)
    kept = t[keep]
    return TimeSummary(float(kept.mean()), float(kept.std()), excluded)


@dataclass(frozen=True)
class BenchCondition:
    vary: Vary
    values: tuple[int, ...]
    fixed_value: int | None = None
    test_samples: int = 500
    batch_size: int = 5
    repetitions: int = 10
    seed: int = 0
    class_count: int = 5
    k: int = 15
    workers: int = 1

    def __post_init__(self):
        if self.vary not in DEFAULT_FIXED:
            raise ValueError(f"vary must be one of {tuple(DEFAULT_FIXED)}")
        values = tuple(int(v) for v in self.values)
        if not values or any(v < 1 for v in values) or list(values) != sorted(set(values)):
            raise ValueError("values must be non-empty, positive and strictly ascending")
        object.__setattr__(self, "values", values)
        if self.fixed_value is None:
            object.__setattr__(self, "fixed_value", DEFAULT_FIXED[self.vary])
        for name in ("fixed_value", "test_samples", "batch_size", "repetitions", "class_count", "k", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.batch_size > self.test_samples:
            raise ValueError("batch_size must not exceed test_samples")

    def train_size(self, value: int) -> int:
        return self.fixed_value if self.vary == "dimensionality" else value

    def dim(self, value: int) -> int:
        return value if self.vary == "dimensionality" else self.fixed_value


@dataclass
class TimingRow:
    value: int
    mean_s: float
    std_s: float
    n: int
    excluded: int
    raw_samples: list[float]
    unstable: bool = False
    dataset_hash: str = ""
    output_hash: str = ""


@dataclass
class TimingReport:
    kind: str
    condition: BenchCondition
    rows: list[TimingRow] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    clock: str = "time.perf_counter"
    clock_resolution_s: float = field(
        default_factory=lambda: time.get_clock_info("perf_counter").resolution
    )

    CSV_COLUMNS = ("vary", "value", "mean_s", "std_s", "n", "excluded")

    def to_csv(self) -> str:
        lines = [f"# {self.kind} benchmark; clock={self.clock} resolution_s={self.clock_resolution_s:g}"]
        lines += [f"# {note}" for note in self.notes]
        lines.append(",".join(self.CSV_COLUMNS))
        for r in self.rows:
            lines.append(",".join([
                self.condition.vary, str(r.value), format_number(r.mean_s),
                format_number(r.std_s), str(r.n), str(r.excluded),
            ]))
        return "\n".join(lines) + "\n"

    def to_svg(self, title: str | None = None) -> str:
        return timing_svg(self, title)


# --- data --------------------------------------------------------------------


def placeholder_projections(samples: np.ndarray, out_dim: int = 2) -> np.ndarray:
    """First ``out_dim`` features scaled to unit variance, zero-padded if D is smaller."""
    cols = samples[:, :out_dim].astype(np.float64)
    std = cols.std(axis=0)
    cols = cols / np.where(std > 0, std, 1.0)
    if cols.shape[1] < out_dim:
        cols = np.hstack([cols, np.zeros((cols.shape[0], out_dim - cols.shape[1]))])
    return cols


def condition_data(cond: BenchCondition):
    """Yield ``(value, train, test, dataset_hash)`` for each condition value.

    Rows are interleaved by class so that every prefix used as a training
    subset is balanced. Varying sample counts share one dataset and one
    test set; varying dimensionality generates one dataset per value.
    """
    def make(dim, rows):
        per_class = math.ceil(rows / cond.class_count)
        spec = PoissonSpec(cond.class_count, dim, per_class, seed=cond.seed)
        return interleave_classes(generate_poisson(spec))

    if cond.vary == "sample_count":
        n_max = cond.values[-1]
        ds = make(cond.fixed_value, n_max + cond.test_samples)
        test = ds.samples[n_max : n_max + cond.test_samples]
        for value in cond.values:
            yield value, ds.samples[:value], test, ds.content_hash()
    else:
        for value in cond.values:
            ds = make(value, cond.fixed_value + cond.test_samples)
            train = ds.samples[: cond.fixed_value]
            test = ds.samples[cond.fixed_value : cond.fixed_value + cond.test_samples]
            yield value, train, test, ds.content_hash()


def _config(cond: BenchCondition, n_train: int) -> ProjectorConfig:
    return ProjectorConfig(k=min(cond.k, n_train))


def output_hash(projections: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(projections, dtype=np.float64).tobytes()).hexdigest()


class BatchMismatch(AssertionError):
    """Batched and one-go projections disagree."""


# --- benchmarks --------------------------------------------------------------


def _row(value, samples, **extra) -> TimingRow:
    s = summarize_times(samples)
    n = len(samples) if s.unstable else len(samples) - s.excluded
    return TimingRow(value, s.mean, s.std, n, s.excluded, list(samples), s.unstable, **extra)


def bench_fit(cond: BenchCondition, progress=None) -> TimingReport:
    report = TimingReport("fit", cond, notes=[FIT_NOTE])
    for value, train, _test, ds_hash in condition_data(cond):
        projections = placeholder_projections(train)
        config = _config(cond, train.shape[0])
        samples = []
        for _ in range(cond.repetitions):
            start = time.perf_counter()
            fit(ReferenceEmbedding(train, projections), config)
            samples.append(time.perf_counter() - start)
        report.rows.append(_row(value, samples, dataset_hash=ds_hash))
        if progress:
            progress(report.rows[-1])
    return report


def time_projection(projector: Projector, test: np.ndarray, batch_size: int, workers: int = 1):
    """One repetition: per-batch times summed; returns (seconds, outputs)."""
    total = 0.0
    parts = []
    for start in range(0, test.shape[0], batch_size):
        batch = test[start : start + batch_size]
        t0 = time.perf_counter()
        out = projector.project_batch(batch, workers=workers)
        total += time.perf_counter() - t0
        parts.append(out)
    return total, np.vstack(parts)


def bench_project(cond: BenchCondition, progress=None) -> TimingReport:
    """Time projecting ``test_samples`` points in batches of ``batch_size``.

    Each condition's output is checked against a single one-go projection
    of the same points; any difference raises :class:`BatchMismatch`.
    """
    notes = [WARMUP_NOTE, f"batch_size={cond.batch_size} test_samples={cond.test_samples}"]
    if cond.workers > 1:
        notes.append(f"concurrent projection with {cond.workers} worker threads")
    report = TimingReport("project", cond, notes=notes)
    for value, train, test, ds_hash in condition_data(cond):
        projector = fit(ReferenceEmbedding(train, placeholder_projections(train)), _config(cond, train.shape[0]))
        reference = projector.project_batch(test)
        time_projection(projector, test, cond.batch_size, cond.workers)
        samples = []
        outputs = None
        for _ in range(cond.repetitions):
            seconds, out = time_projection(projector, test, cond.batch_size, cond.workers)
            samples.append(seconds)
            outputs = out if outputs is None else outputs
        digest = output_hash(outputs)
        if digest != output_hash(reference):
            raise BatchMismatch(
                f"value={value}: batch_size={cond.batch_size} output differs from one-go output"
            )
        report.rows.append(_row(value, samples, dataset_hash=ds_hash, output_hash=digest))
        if progress:
            progress(report.rows[-1])
    return report


# --- chart -------------------------------------------------------------------


def timing_svg(report: TimingReport, title: str | None = None) -> str:
    """Line chart of mean time per condition value with ±1 std error bars."""
    w, h, left, right, top, bottom = 560, 360, 70, 20, 40, 50
    rows = report.rows
    title = title or f"{report.kind} time vs {report.condition.vary}"
    means = np.array([r.mean_s for r in rows]) if rows else np.zeros(0)
    stds = np.array([r.std_s for r in rows]) if rows else np.zeros(0)
    y_max = float((means + stds).max()) if rows else 1.0
    y_max = y_max if y_max > 0 else 1.0
    plot_w, plot_h = w - left - right, h - top - bottom

    def px(i):
        return left + (plot_w * (i + 0.5) / max(len(rows), 1))

    def py(v):
        return top + plot_h * (1.0 - v / y_max)

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>',
        f'<text x="{left}" y="24" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="#000000"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#000000"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        v = y_max * frac
        out.append(f'<text x="{left - 6}" y="{py(v) + 4:.2f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="10">{v * 1e3:.3g} ms</text>')
    if rows:
        pts = " ".join(f"{px(i):.2f},{py(m):.2f}" for i, m in enumerate(means))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#0072b2" stroke-width="2"/>')
    for i, (r, m, s) in enumerate(zip(rows, means, stds)):
        x = px(i)
        out.append(f'<line class="errorbar" x1="{x:.2f}" y1="{py(m - s):.2f}" x2="{x:.2f}" y2="{py(m + s):.2f}" '
                   'stroke="#0072b2"/>')
        out.append(f'<circle cx="{x:.2f}" cy="{py(m):.2f}" r="3" fill="#0072b2"/>')
        out.append(f'<text x="{x:.2f}" y="{top + plot_h + 16}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="10">{r.value}</text>')
    out.append(f'<text x="{left + plot_w / 2:.2f}" y="{h - 10}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{report.condition.vary}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
