import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drgda.errors import DimensionError, SpectralError, TopologyError
from drgda.network import (
    Topology,
    build_metropolis,
    check_doubly_stochastic,
    complete,
    erdos_renyi,
    make_topology,
    mix,
    required_k,
    ring,
    torus,
)

graphs = st.one_of(
    st.integers(2, 20).map(ring),
    st.integers(2, 10).map(complete),
    st.tuples(st.integers(2, 5), st.integers(2, 5)).map(lambda t: torus(*t)),
    st.tuples(st.integers(3, 15), st.integers(0, 1000)).map(lambda t: erdos_renyi(t[0], 0.4, t[1])),
)


def test_complete_two():
    W = build_metropolis(complete(2))
    np.testing.assert_allclose(W.w, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    assert W.lambda2 == pytest.approx(0.0, abs=1e-15)


def test_ring4_weights_and_lambda2():
    W = build_metropolis(ring(4))
    expected = np.array([[1, 1, 0, 1], [1, 1, 1, 0], [0, 1, 1, 1], [1, 0, 1, 1]]) / 3
    np.testing.assert_allclose(W.w, expected, atol=1e-15)
    assert W.lambda2 == pytest.approx(1 / 3, abs=1e-12)


@pytest.mark.parametrize("n", [4, 8, 20])
def test_ring_circulant_spectrum(n):
    W = build_metropolis(ring(n))
    circ = sorted(((1 + 2 * math.cos(2 * math.pi * j / n)) / 3 for j in range(n)), reverse=True)
    np.testing.assert_allclose(W.eigenvalues, circ, atol=1e-12)
    assert W.lambda2 == pytest.approx(max(abs(c) for c in circ[1:]), abs=1e-12)


def test_ring20_lambda2_formula():
    assert build_metropolis(ring(20)).lambda2 == pytest.approx((1 + 2 * math.cos(2 * math.pi / 20)) / 3, abs=1e-12)


def test_required_k_examples():
    assert required_k(0.5, 1) == 1
    assert required_k(0.9, 20) == 21
    assert required_k(0.0, 7) == 1
    with pytest.raises(SpectralError):
        required_k(1.0, 4)


def test_disconnected_graph_rejected():
    with pytest.raises(TopologyError):
        build_metropolis(Topology(4, frozenset({(0, 1), (2, 3)})))


def test_self_loops_rejected():
    with pytest.raises(TopologyError):
        Topology(3, frozenset({(0, 0), (0, 1), (1, 2)}))


def test_make_topology_kinds():
    assert make_topology("ring", 5).n == 5
    assert make_topology("torus", 12, rows=3, cols=4).n == 12
    assert all(d == 4 for d in make_topology("torus", 16).degrees())
    er = make_topology("erdos_renyi", 10, p=0.3, seed=3)
    assert er.is_connected() and er == make_topology("erdos_renyi", 10, p=0.3, seed=3)
    with pytest.raises(TopologyError):
        make_topology("torus", 7, rows=2, cols=3)
    with pytest.raises(TopologyError):
        make_topology("star", 4)


def test_mix_examples():
    W = build_metropolis(complete(2))
    a, b = np.arange(6.0).reshape(3, 2), np.ones((3, 2))
    out = mix(W, np.stack([a, b]), 1)
    np.testing.assert_allclose(out[0], (a + b) / 2)
    np.testing.assert_allclose(out[1], (a + b) / 2)
    W8 = build_metropolis(ring(8))
    same = np.repeat(a[None], 8, 0)
    np.testing.assert_allclose(mix(W8, same, 5), same, atol=1e-14)
    with pytest.raises(DimensionError):
        mix(W8, np.zeros((7, 2)), 1)


def test_mix_power_associativity_and_precompute():
    rng = np.random.default_rng(0)
    W = build_metropolis(ring(8))
    v = rng.standard_normal((8, 4, 3))
    three = mix(W, mix(W, mix(W, v, 1), 1), 1)
    np.testing.assert_allclose(mix(W, v, 3), three, atol=1e-12)
    np.testing.assert_allclose(mix(W, v, 3, precomputed=True), three, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(graphs)
def test_metropolis_invariants(topo):
    W = build_metropolis(topo)
    check_doubly_stochastic(W.w, 1e-12)
    n = topo.n
    adj = np.zeros((n, n), bool)
    for i, j in topo.edges:
        adj[i, j] = adj[j, i] = True
    offdiag = ~np.eye(n, dtype=bool)
    assert np.all((W.w[offdiag] > 0) == adj[offdiag])
    assert 0 <= W.lambda2 < 1


@settings(max_examples=60, deadline=None)
@given(graphs, st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_mix_mean_and_contraction(topo, power, seed):
    W = build_metropolis(topo)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((topo.n, 3, 2))
    out = mix(W, v, power)
    np.testing.assert_allclose(out.mean(0), v.mean(0), atol=1e-12)
    dev_in = np.linalg.norm(v - v.mean(0))
    dev_out = np.linalg.norm(out - out.mean(0))
    assert dev_out <= W.lambda2**power * dev_in + 1e-10
    wp = np.linalg.matrix_power(W.w, power)
    check_doubly_stochastic(wp, 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6), st.integers(1, 10_000))
def test_required_k_defining_property(lam, n):
    k = required_k(lam, n)
    assert k >= 1
    assert lam**k <= 1 / (2 * math.sqrt(n))
    if k > 1:
        assert lam ** (k - 1) > 1 / (2 * math.sqrt(n))
