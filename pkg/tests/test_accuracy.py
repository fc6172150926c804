import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from aumap import CountMismatch, DegenerateOracle, ProjectorConfig, ReferenceEmbedding, UnsupportedDimensionality, fit
from aumap.accuracy import PALETTE, emit_scatter_svg, normalized_mean_distance, scatter_svg
from aumap.dataio import load_fixture


def test_identity():
    o = np.random.default_rng(0).normal(size=(20, 2))
    r = normalized_mean_distance(o, o)
    assert r.mean_distance == 0.0 and r.variance == 0.0 and r.n_points == 20


def test_worked_example():
    r = normalized_mean_distance([[1, 1], [-1, -1]], [[1, 0], [-1, 0]])
    assert r.sigma == 1.0
    assert r.mean_distance == 1.0
    assert r.variance == 0.0


def test_errors():
    with pytest.raises(CountMismatch):
        normalized_mean_distance([[0, 0]], [[0, 0], [1, 1]])
    with pytest.raises(CountMismatch):
        normalized_mean_distance(np.empty((0, 2)), np.empty((0, 2)))
    with pytest.raises(DegenerateOracle):
        normalized_mean_distance([[0, 0], [1, 1]], [[2, 2], [2, 2]])


def test_report_formats():
    r = normalized_mean_distance([[1, 1], [-1, -1]], [[1, 0], [-1, 0]])
    assert "mean_distance=1" in r.as_text().splitlines()
    assert r.as_csv_row() == "1,0,2,1"


pts = hnp.arrays(np.float64, st.tuples(st.integers(2, 20), st.just(2)), elements=st.floats(-100, 100))


@given(pts, pts, st.floats(1e-3, 1e3), st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)))
def test_property_scale_and_translation_invariance(a, o, c, shift):
    n = min(len(a), len(o))
    a, o = a[:n], o[:n]
    try:
        base = normalized_mean_distance(a, o)
    except DegenerateOracle:
        return
    if base.sigma < 1e-6:
        return
    scaled = normalized_mean_distance(a * c, o * c)
    moved = normalized_mean_distance(a + shift, o + shift)
    for r in (scaled, moved):
        assert r.mean_distance == pytest.approx(base.mean_distance, rel=1e-9, abs=1e-9)
        assert r.variance == pytest.approx(base.variance, rel=1e-7, abs=1e-9)


@given(pts, st.integers(0, 19), st.floats(1e-6, 10))
def test_property_zero_iff_equal(o, i, eps):
    try:
        assert normalized_mean_distance(o, o).mean_distance == 0.0
    except DegenerateOracle:
        return
    a = o.copy()
    a[i % len(o), 0] += eps
    assert normalized_mean_distance(a, o).mean_distance > 0.0


def test_digits_fixture_accuracy(fixtures_dir):
    fx = load_fixture(fixtures_dir / "digits")
    approx = fit(fx.train, ProjectorConfig(k=fx.manifest.knn_k)).project_batch(fx.test.samples)
    assert abs(normalized_mean_distance(approx, fx.test_oracle).mean_distance - 0.083) <= 0.15


def _iris_svg(fixtures_dir):
    fx = load_fixture(fixtures_dir / "iris")
    approx = fit(fx.train, ProjectorConfig(k=15)).project_batch(fx.test.samples)
    return scatter_svg(fx.train.projections, fx.train.labels, fx.test_oracle, approx, fx.test.labels, "Iris")


def test_iris_svg_elements(fixtures_dir):
    svg = _iris_svg(fixtures_dir)
    assert svg.count('class="connector"') == 30
    assert svg.count('class="oracle"') == 30 and svg.count('class="approx"') == 30
    assert svg.count('class="train"') == 120
    swatches = re.findall(r'class="swatch"[^>]*fill="(#[0-9a-f]{6})"', svg)
    assert swatches == list(PALETTE[:3])
    assert 'stroke="#9a9a9a"' in svg
    assert svg == _iris_svg(fixtures_dir)


def test_emit_writes_deterministic_file(tmp_path):
    rng = np.random.default_rng(5)
    emb = ReferenceEmbedding(rng.normal(size=(10, 3)), rng.normal(size=(10, 2)), rng.integers(0, 2, 10))
    o, a = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    emit_scatter_svg(emb, o, a, tmp_path / "a.svg", title="x < y & z")
    emit_scatter_svg(emb, o, a, tmp_path / "b.svg", title="x < y & z")
    text = (tmp_path / "a.svg").read_bytes()
    assert text == (tmp_path / "b.svg").read_bytes()
    assert b"x &lt; y &amp; z" in text


def test_empty_test_set():
    rng = np.random.default_rng(6)
    svg = scatter_svg(rng.normal(size=(8, 2)), [0, 1] * 4, np.empty((0, 2)), np.empty((0, 2)))
    assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>")
    assert svg.count('class="train"') == 8 and 'class="connector"' not in svg


def test_three_dimensional_projection_rejected(tmp_path):
    rng = np.random.default_rng(7)
    emb = ReferenceEmbedding(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)))
    with pytest.raises(UnsupportedDimensionality):
        emit_scatter_svg(emb, rng.normal(size=(2, 3)), rng.normal(size=(2, 3)), tmp_path / "x.svg")
    with pytest.raises(UnsupportedDimensionality):
        scatter_svg(rng.normal(size=(5, 3)), None, rng.normal(size=(2, 3)), rng.normal(size=(2, 3)))
