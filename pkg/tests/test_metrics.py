import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusnorm import (
    ConformalMetric,
    FlatMetric,
    GeneralMetric,
    LiouvilleMetric,
    TangentSample,
    distortion_constant,
    fiber_distortion,
    metric_eval,
    metric_from_dict,
)
from torusnorm.errors import SpecError
from torusnorm.fixtures import random_general
from torusnorm.oracles import dense_distortion_scan

coords = st.floats(min_value=-2.0, max_value=3.0, allow_nan=False)
vec_entries = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


def _metric_pool():
    return [
        FlatMetric(np.eye(2)),
        FlatMetric([[2.0, 1.0], [1.0, 2.0]]),
        ConformalMetric("1 + 0.5*sin(2*pi*x)**2"),
        LiouvilleMetric("2", "3"),
        LiouvilleMetric("1 + 0.3*sin(pi*x)**2", "2 + 0.4*cos(2*pi*y)"),
        random_general(np.random.default_rng(5)),
    ]


_POOL = _metric_pool()


def test_metric_eval_examples():
    assert metric_eval(FlatMetric(np.eye(2)), TangentSample((0.3, 0.7), (1, 0))) == 1.0
    conf = ConformalMetric("2")
    assert metric_eval(conf, TangentSample((0.1, 0.9), (1, 1))) == pytest.approx(4.0)
    liou = LiouvilleMetric("2", "3")
    assert metric_eval(liou, TangentSample((0.5, 0.5), (0, 1))) == pytest.approx(5.0)


def test_zero_vector_gives_zero():
    for g in _POOL:
        assert metric_eval(g, TangentSample((0.2, 0.4), (0, 0))) == 0.0


@settings(max_examples=40, deadline=None, derandomize=True)
@given(
    gi=st.integers(0, len(_POOL) - 1),
    x=st.tuples(coords, coords),
    v=st.tuples(vec_entries, vec_entries),
)
def test_symmetry_in_v(gi, x, v):
    g = _POOL[gi]
    s_plus = metric_eval(g, TangentSample(x, v))
    s_minus = metric_eval(g, TangentSample(x, (-v[0], -v[1])))
    assert s_plus == pytest.approx(s_minus, rel=1e-12, abs=1e-15)


@settings(max_examples=40, deadline=None, derandomize=True)
@given(
    gi=st.integers(0, len(_POOL) - 1),
    x=st.tuples(coords, coords),
    v=st.tuples(vec_entries, vec_entries),
    t=st.sampled_from([0.5, 2.0, 10.0]),
)
def test_quadratic_homogeneity(gi, x, v, t):
    g = _POOL[gi]
    base = metric_eval(g, TangentSample(x, v))
    scaled = metric_eval(g, TangentSample(x, (t * v[0], t * v[1])))
    assert scaled == pytest.approx(t * t * base, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None, derandomize=True)
@given(
    gi=st.integers(0, len(_POOL) - 1),
    x=st.tuples(st.floats(0.0, 1.0, allow_nan=False), st.floats(0.0, 1.0, allow_nan=False)),
    shift=st.sampled_from([(1, 0), (0, 1), (1, 1), (-2, 3)]),
)
def test_periodicity(gi, x, shift):
    g = _POOL[gi]
    v = (0.7, -0.4)
    a = metric_eval(g, TangentSample(x, v))
    b = metric_eval(g, TangentSample((x[0] + shift[0], x[1] + shift[1]), v))
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_flat_requires_spd():
    with pytest.raises(SpecError):
        FlatMetric([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(SpecError):
        FlatMetric([[1.0, 0.5], [0.4, 1.0]])  # asymmetric
    with pytest.raises(SpecError):
        ConformalMetric("sin(2*pi*x)")  # not positive


def test_fiber_distortion_examples():
    g1 = FlatMetric(np.eye(2))
    assert fiber_distortion(g1, g1.scaled(3.0), (0.2, 0.9)) == pytest.approx(3.0)
    g2 = FlatMetric([[1.0, 0.0], [0.0, 4.0]])
    assert fiber_distortion(g1, g2, (0.5, 0.5)) == pytest.approx(4.0)
    conf = ConformalMetric("1 + 0.5*sin(2*pi*x)**2")
    x = (0.13, 0.77)
    phi = 1 + 0.5 * np.sin(2 * np.pi * x[0]) ** 2
    assert fiber_distortion(g1, conf, x) == pytest.approx(phi, rel=1e-12)


@pytest.mark.parametrize("c", [0.1, 1.0, 7.0])
def test_distortion_constant_rescaling(c):
    g = ConformalMetric("1 + 0.3*cos(2*pi*y)")
    val, _ = distortion_constant(g, g.scaled(c), grid_n=16)
    assert val == pytest.approx(c, rel=1e-12)


def test_distortion_constant_conformal_wave():
    g1 = FlatMetric(np.eye(2))
    g2 = ConformalMetric("1 + 0.5*sin(2*pi*x)**2")
    val, (x, y) = distortion_constant(g1, g2, grid_n=32)
    assert val == pytest.approx(1.5, rel=1e-8)
    assert min(abs(x - 0.25), abs(x - 0.75)) < 1e-4


def test_distortion_constant_general_vs_dense_scan():
    g1 = random_general(np.random.default_rng(11))
    g2 = random_general(np.random.default_rng(12))
    val, _ = distortion_constant(g1, g2, grid_n=64)
    brute = dense_distortion_scan(g1, g2, n=2048)
    assert val == pytest.approx(brute, rel=1e-6)


def test_distortion_grid_n_validated():
    g = FlatMetric(np.eye(2))
    with pytest.raises(SpecError):
        distortion_constant(g, g, grid_n=8)


def test_json_roundtrip():
    for g in _POOL:
        d = g.to_dict()
        g2 = metric_from_dict(json.loads(json.dumps(d)))
        pts = np.random.default_rng(1).uniform(0, 1, size=(10, 2))
        vecs = np.random.default_rng(2).uniform(-1, 1, size=(10, 2))
        np.testing.assert_allclose(g.quadratic(pts, vecs), g2.quadratic(pts, vecs), rtol=1e-12)


def test_metric_from_dict_errors():
    with pytest.raises(SpecError):
        metric_from_dict({"type": "nope"})
    with pytest.raises(SpecError):
        metric_from_dict({"type": "conformal"})
    with pytest.raises(SpecError):
        metric_from_dict({})


def test_general_metric_spd_validated():
    bad = np.tile(np.array([[1.0, 2.0], [2.0, 1.0]]), (4, 4, 1, 1))
    with pytest.raises(SpecError):
        GeneralMetric(bad)


def test_quadratic_with_grad_consistent():
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 1, size=(30, 2))
    vecs = rng.uniform(-1, 1, size=(30, 2))
    for g in _POOL:
        q, xg, gv = g.quadratic_with_grad(pts, vecs)
        np.testing.assert_allclose(q, g.quadratic(pts, vecs), rtol=1e-12)
        np.testing.assert_allclose(q, np.sum(vecs * gv, axis=-1), rtol=1e-12)
        h = 1e-6
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            fd = (g.quadratic(pts + e, vecs) - g.quadratic(pts - e, vecs)) / (2 * h)
            np.testing.assert_allclose(xg[:, axis], fd, rtol=2e-5, atol=1e-6)
