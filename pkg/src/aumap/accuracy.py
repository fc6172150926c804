"""Projection accuracy against oracle UMAP projections, and scatter-plot SVGs."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from numpy.typing import NDArray

from .core import (
    CountMismatch,
    DegenerateOracle,
    DimensionMismatch,
    UnsupportedDimensionality,
    as_matrix,
    check_finite,
)
from .dataio import atomic_write, format_number

# Colorblind-safe qualitative palette, indexed by class label.
PALETTE = (
    "#0072b2", "#e69f00", "#009e73", "#cc79a7", "#56b4e9",
    "#d55e00", "#f0e442", "#000000", "#999999", "#882255",
)


@dataclass(frozen=True)
class AccuracyReport:
    """Normalized distances between approximate and oracle projections.

    ``mean_distance`` and ``variance`` are in units of ``sigma``, the RMS
    distance of the oracle projections from their centroid.
    """

    mean_distance: float
    variance: float
    n_points: int
    sigma: float

    def as_text(self) -> str:
        return "\n".join(f"{key}={format_number(value)}" for key, value in asdict(self).items())

    CSV_HEADER = "mean_distance,variance,n_points,sigma"

    def as_csv_row(self) -> str:
        return ",".join(format_number(v) for v in asdict(self).values())


def normalized_distances(approx, oracle) -> tuple[NDArray[np.float64], float]:
    approx = as_matrix(approx, "approx")
    oracle = as_matrix(oracle, "oracle")
    if approx.shape[0] != oracle.shape[0]:
        raise CountMismatch(f"{approx.shape[0]} approximate vs {oracle.shape[0]} oracle projections")
    if oracle.shape[0] == 0:
        raise CountMismatch("need at least one projection pair")
    if approx.shape[1] != oracle.shape[1]:
        raise DimensionMismatch(f"projection widths differ: {approx.shape[1]} vs {oracle.shape[1]}")
    check_finite(approx, "approx")
    check_finite(oracle, "oracle")
    centered = oracle - oracle.mean(axis=0)
    sigma = float(np.sqrt(np.square(centered).sum(axis=1).mean()))
    if sigma == 0.0:
        raise DegenerateOracle("oracle projections are all identical; cannot normalize")
    return np.linalg.norm(approx - oracle, axis=1) / sigma, sigma


def normalized_mean_distance(approx, oracle) -> AccuracyReport:
    errors, sigma = normalized_distances(approx, oracle)
    return AccuracyReport(
        mean_distance=float(errors.mean()),
        variance=float(errors.var()),
        n_points=int(errors.size),
        sigma=sigma,
    )


# --- SVG ---------------------------------------------------------------------

_W, _H, _PAD, _LEGEND_W = 640, 480, 40, 150


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    def __init__(self, points: NDArray[np.float64]):
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        self.lo, self.span = lo, span
        self.plot_w = _W - _LEGEND_W - 2 * _PAD
        self.plot_h = _H - 2 * _PAD

    def xy(self, p) -> tuple[str, str]:
        x = _PAD + (p[0] - self.lo[0]) / self.span[0] * self.plot_w
        y = _H - _PAD - (p[1] - self.lo[1]) / self.span[1] * self.plot_h
        return _fmt(x), _fmt(y)


def _color(label) -> str:
    return PALETTE[int(label) % len(PALETTE)] if label is not None else "#444444"


def _labels_or_none(labels, n):
    if labels is None:
        return [None] * n
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise CountMismatch(f"{labels.shape[0]} labels for {n} points")
    return labels.tolist()


def scatter_svg(
    train: NDArray[np.float64],
    train_labels,
    oracle_test: NDArray[np.float64],
    approx_test: NDArray[np.float64],
    test_labels=None,
    title: str = "",
) -> str:
    """Render the comparison plot and return SVG source.

    Training points are small dots, oracle test projections circles,
    approximate test projections crosses; a gray segment joins each
    oracle/approximate pair.
    """
    train = as_matrix(train, "train")
    oracle_test = as_matrix(oracle_test, "oracle").reshape(-1, train.shape[1] if train.size else 2)
    approx_test = as_matrix(approx_test, "approx").reshape(-1, oracle_test.shape[1])
    for name, arr in (("train", train), ("oracle", oracle_test), ("approx", approx_test)):
        if arr.shape[1] != 2:
            raise UnsupportedDimensionality(f"{name} projections have m={arr.shape[1]}; only m=2 is plotted")
    if oracle_test.shape[0] != approx_test.shape[0]:
        raise CountMismatch(f"{oracle_test.shape[0]} oracle vs {approx_test.shape[0]} approximate test points")
    train_lab = _labels_or_none(train_labels, train.shape[0])
    test_lab = _labels_or_none(test_labels, oracle_test.shape[0])

    frame = _Frame(np.vstack([train, oracle_test, approx_test]))
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{_PAD}" y="{_PAD // 2 + 4}" font-family="sans-serif" font-size="14">'
                   f"{escape(title)}</text>")
    out.append('<g id="train">')
    for p, lab in zip(train, train_lab):
        x, y = frame.xy(p)
        out.append(f'<circle class="train" cx="{x}" cy="{y}" r="2" fill="{_color(lab)}" fill-opacity="0.5"/>')
    out.append("</g>")
    out.append('<g id="connectors" stroke="#9a9a9a" stroke-width="1">')
    for o, a in zip(oracle_test, approx_test):
        x1, y1 = frame.xy(o)
        x2, y2 = frame.xy(a)
        out.append(f'<line class="connector" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>')
    out.append("</g>")
    out.append('<g id="oracle">')
    for p, lab in zip(oracle_test, test_lab):
        x, y = frame.xy(p)
        out.append(f'<circle class="oracle" cx="{x}" cy="{y}" r="4" fill="none" '
                   f'stroke="{_color(lab)}" stroke-width="1.5"/>')
    out.append("</g>")
    out.append('<g id="approx">')
    for p, lab in zip(approx_test, test_lab):
        x, y = (float(v) for v in frame.xy(p))
        out.append(f'<path class="approx" d="M{_fmt(x - 3)},{_fmt(y - 3)}L{_fmt(x + 3)},{_fmt(y + 3)}'
                   f'M{_fmt(x - 3)},{_fmt(y + 3)}L{_fmt(x + 3)},{_fmt(y - 3)}" '
                   f'stroke="{_color(lab)}" stroke-width="1.5"/>')
    out.append("</g>")
    out.extend(_legend(sorted({lab for lab in train_lab + test_lab if lab is not None})))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _legend(classes) -> list[str]:
    x0 = _W - _LEGEND_W + 10
    rows = [("train", "dot"), ("UMAP test", "circle"), ("approx. test", "cross")]
    out = ['<g id="legend" font-family="sans-serif" font-size="11">']
    y = _PAD
    for text, marker in rows:
        if marker == "dot":
            out.append(f'<circle cx="{x0}" cy="{y}" r="2" fill="#444444"/>')
        elif marker == "circle":
            out.append(f'<circle cx="{x0}" cy="{y}" r="4" fill="none" stroke="#444444" stroke-width="1.5"/>')
        else:
            out.append(f'<path d="M{x0 - 3},{y - 3}L{x0 + 3},{y + 3}M{x0 - 3},{y + 3}L{x0 + 3},{y - 3}" '
                       'stroke="#444444" stroke-width="1.5"/>')
        out.append(f'<text x="{x0 + 10}" y="{y + 4}">{text}</text>')
        y += 18
    for c in classes:
        out.append(f'<rect class="swatch" x="{x0 - 4}" y="{y - 4}" width="8" height="8" fill="{_color(c)}"/>')
        out.append(f'<text x="{x0 + 10}" y="{y + 4}">class {c}</text>')
        y += 18
    out.append("</g>")
    return out


def emit_scatter_svg(train, oracle_test, approx_test, path, test_labels=None, title: str = "") -> None:
    """Write the comparison plot for a labeled reference embedding to ``path``.

    ``train`` is a :class:`~aumap.core.ReferenceEmbedding`; its labels color
    the training points.
    """
    if train.out_dim != 2:
        raise UnsupportedDimensionality(f"reference projections have m={train.out_dim}; only m=2 is plotted")
    svg = scatter_svg(train.projections, train.labels, oracle_test, approx_test, test_labels, title)
    with atomic_write(Path(path)) as fh:
        fh.write(svg)
