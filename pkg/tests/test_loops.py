import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusnorm import (
    DiscreteLoop,
    FlatMetric,
    HomologyClass,
    energy_gradient,
    init_loop,
    loop_energy,
    loop_length,
    resample,
)
from torusnorm.errors import NullClassError, SpecError
from torusnorm.fixtures import conformal_dip
from torusnorm.oracles import finite_difference_gradient


def straight_loop(k, n, base=(0.0, 0.0)):
    s = np.arange(n) / n
    return DiscreteLoop(k, np.asarray(base) + np.outer(s, np.asarray(k, dtype=float)))


# --- homology classes ---------------------------------------------------


def test_homology_class_basics():
    h = HomologyClass(2, 3)
    assert h.primitive_part() == (2, 3)
    assert h.gcd == 1
    h = HomologyClass(4, -6, Fraction(1, 2))
    assert h.gcd == 2
    assert h.primitive_part() == (2, -3)
    assert h.weight == pytest.approx(1.0)
    np.testing.assert_allclose(h.as_vector(), [2.0, -3.0])


@settings(max_examples=60, deadline=None, derandomize=True)
@given(p=st.integers(-30, 30), q=st.integers(-30, 30))
def test_primitive_part_coprime(p, q):
    if p == 0 and q == 0:
        with pytest.raises(NullClassError):
            HomologyClass(p, q).primitive_part()
        return
    a, b = HomologyClass(p, q).primitive_part()
    assert math.gcd(abs(a), abs(b)) == 1
    g = HomologyClass(p, q).gcd
    assert (a * g, b * g) == (p, q)


def test_scale_must_be_positive():
    with pytest.raises(SpecError):
        HomologyClass(1, 0, Fraction(-1, 2))


# --- construction -------------------------------------------------------


def test_init_loop_straight():
    loop = init_loop((1, 0), 8, seed=0, amplitude=0.0)
    d = loop.nodes[1:] - loop.nodes[:-1]
    np.testing.assert_allclose(d, np.tile([1 / 8, 0.0], (7, 1)), atol=1e-15)


def test_init_loop_offset_endpoint():
    loop = init_loop((2, 3), 16, seed=5, amplitude=0.0)
    du, _ = loop.segments()
    np.testing.assert_allclose(du.sum(axis=0), [2.0, 3.0], atol=1e-12)


def test_init_loop_deterministic():
    a = init_loop((1, 2), 12, seed=9, amplitude=0.3)
    b = init_loop((1, 2), 12, seed=9, amplitude=0.3)
    np.testing.assert_array_equal(a.nodes, b.nodes)


def test_init_loop_null_class():
    with pytest.raises(NullClassError):
        init_loop((0, 0), 8)


def test_min_nodes_enforced():
    with pytest.raises(SpecError):
        init_loop((1, 0), 7)
    with pytest.raises(SpecError):
        DiscreteLoop((1, 0), np.zeros((4, 2)))


# --- length / energy ----------------------------------------------------


def test_length_examples(flat_identity, flat_diag14):
    assert loop_length(flat_identity, straight_loop((1, 0), 16)) == pytest.approx(1.0)
    assert loop_length(flat_diag14, straight_loop((1, 1), 16)) == pytest.approx(math.sqrt(5.0))
    from torusnorm import ConformalMetric

    conf = ConformalMetric("4")
    assert loop_length(conf, straight_loop((1, 0), 16)) == pytest.approx(2.0)


def test_length_cyclic_relabeling(flat_identity, dip_metric):
    loop = init_loop((1, 1), 16, seed=2, amplitude=0.2)
    rolled = DiscreteLoop(loop.k, np.roll(loop.nodes, 5, axis=0))
    # rolling breaks the lift ordering unless we re-lift: go through a loop
    # whose nodes stay within one period instead
    for g in (flat_identity, dip_metric):
        base = loop_length(g, loop)
        shifted = DiscreteLoop(loop.k, loop.nodes + np.array([4.0, -7.0]))
        assert loop_length(g, shifted) == pytest.approx(base, rel=1e-12)


def test_energy_examples(flat_identity):
    assert loop_energy(flat_identity, straight_loop((1, 0), 16)) == pytest.approx(0.5)
    assert loop_energy(flat_identity, straight_loop((3, 4), 64)) == pytest.approx(12.5)


def test_energy_nonequispaced_exceeds():
    g = FlatMetric(np.eye(2))
    s = np.arange(16) / 16.0
    warped = s + 0.02 * np.sin(2 * np.pi * s)
    loop = DiscreteLoop((1, 0), np.stack([warped, np.zeros(16)], axis=1))
    e = loop_energy(g, loop)
    assert e > 0.5
    # direct recomputation oracle
    du, mid = loop.segments()
    direct = 0.5 * 16 * float(np.sum(du[:, 0] ** 2))
    assert e == pytest.approx(direct, rel=1e-14)


@settings(max_examples=25, deadline=None, derandomize=True)
@given(seed=st.integers(0, 1000), amp=st.floats(0.0, 0.4))
def test_energy_length_cauchy_schwarz(seed, amp):
    g = FlatMetric([[1.3, 0.2], [0.2, 0.8]])
    loop = init_loop((1, 1), 16, seed=seed, amplitude=amp)
    e = loop_energy(g, loop)
    l = loop_length(g, loop)
    assert e >= 0.5 * l * l - 1e-12


def test_cauchy_schwarz_equality_on_equispaced(flat_identity):
    loop = straight_loop((2, 1), 32)
    e = loop_energy(flat_identity, loop)
    l = loop_length(flat_identity, loop)
    assert abs(e - 0.5 * l * l) < 1e-10


# --- gradient -----------------------------------------------------------


def test_gradient_zero_on_straight(flat_identity, flat_diag14):
    for g in (flat_identity, flat_diag14):
        grad = energy_gradient(g, straight_loop((1, 0), 16))
        assert np.abs(grad).max() <= 1e-9


def test_gradient_matches_fd(dip_metric, general_metric, liouville_metrics):
    metrics = [dip_metric, general_metric] + liouville_metrics
    for i, g in enumerate(metrics):
        loop = init_loop((1, 0) if i % 2 else (1, 1), 12, seed=i, amplitude=0.25)
        analytic = energy_gradient(g, loop)
        fd = finite_difference_gradient(
            lambda nodes: loop_energy(g, loop.with_nodes(nodes)), loop.nodes
        )
        rel = np.abs(analytic - fd).max() / max(np.abs(analytic).max(), 1e-8)
        assert rel <= 1e-5, f"metric {g!r}: rel {rel}"


def test_gradient_points_away_from_factor_increase():
    # dip fixture: a loop through the dip is pulled toward the centre, so the
    # gradient must agree with finite differences in sign and size
    g = conformal_dip()
    loop = straight_loop((1, 0), 16, base=(0.0, 0.45))
    analytic = energy_gradient(g, loop)
    fd = finite_difference_gradient(
        lambda nodes: loop_energy(g, loop.with_nodes(nodes)), loop.nodes
    )
    assert np.abs(analytic - fd).max() / np.abs(analytic).max() <= 1e-5
    # pushing nodes toward y = 0.5 lowers the factor: gradient y-components
    # near the dip point away from the centre line
    mid_idx = np.argmin(np.abs(loop.nodes[:, 0] % 1.0 - 0.5))
    assert analytic[mid_idx, 1] < 0  # descent direction is +y (toward 0.5)


# --- resample -----------------------------------------------------------


def test_resample_straight_exact(flat_identity):
    loop = straight_loop((1, 0), 8)
    fine = resample(loop, 16)
    assert fine.n == 16
    assert loop_length(flat_identity, fine) == pytest.approx(1.0, abs=1e-12)


def test_resample_roundtrip_length(flat_identity):
    # on a constant-chord loop (the optimizer's output regime) doubling hits
    # the old vertices exactly, so the round trip must reproduce the length
    loop = init_loop((1, 1), 32, seed=3, amplitude=0.1)
    for _ in range(8):
        loop = resample(loop, 32)
    base = loop_length(flat_identity, loop)
    roundtrip = resample(resample(loop, 64), 32)
    assert loop_length(flat_identity, roundtrip) == pytest.approx(base, rel=1e-6)


def test_resample_refinement_length_stable(flat_identity):
    loop = init_loop((2, 1), 24, seed=4, amplitude=0.1)
    base = loop_length(flat_identity, loop)
    fine = resample(loop, 48)
    assert loop_length(flat_identity, fine) == pytest.approx(base, rel=1e-3)


@settings(max_examples=25, deadline=None, derandomize=True)
@given(
    seed=st.integers(0, 500),
    n_new=st.sampled_from([8, 12, 16, 40, 64]),
    k=st.sampled_from([(1, 0), (0, 1), (2, 1), (1, -2)]),
)
def test_resample_preserves_winding(seed, n_new, k):
    loop = init_loop(k, 16, seed=seed, amplitude=0.3)
    out = resample(loop, n_new)
    assert out.k == loop.k
    du, _ = out.segments()
    np.testing.assert_allclose(du.sum(axis=0), np.asarray(k, dtype=float), atol=1e-9)
