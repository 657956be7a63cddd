import numpy as np
import pytest

from graminspect.gat import (
    GatLayerParams, StaleTraceError, gat_attention, gat_backward, gat_forward, init_gat_layer,
)
from graminspect.graphs import CharGraph
from graminspect.numerics import make_rng

from cases import gat_gradcheck
from conftest import random_graph
from oracles import dense_gat


def layer(rng, n_in, n_out, heads, mode="concat", activation="elu"):
    return init_gat_layer(rng, n_in, n_out, heads, mode, activation)


def test_zero_attention_vector_is_uniform(rng):
    p = layer(rng, 3, 4, 2)
    p.a[:] = 0.0
    adj = random_graph(rng, 6)
    alpha = gat_attention(rng.normal(size=(6, 3)), adj, p, head=1)
    assert np.allclose(alpha, adj / adj.sum(axis=1, keepdims=True), atol=1e-15)


def test_self_loop_only_node(rng):
    adj = np.eye(3, dtype=bool)
    adj[0, 1] = adj[1, 0] = True
    alpha = gat_attention(rng.normal(size=(3, 2)), adj, layer(rng, 2, 2, 1), head=0)
    assert alpha[2, 2] == 1.0 and alpha[2, :2].sum() == 0.0


def test_symmetric_pair(rng):
    f = np.tile(rng.normal(size=(1, 3)), (2, 1))
    alpha = gat_attention(f, np.ones((2, 2), bool), layer(rng, 3, 5, 1), head=0)
    assert np.allclose(alpha, 0.5, atol=1e-15)


def test_single_node_identity_activation(rng):
    p = layer(rng, 4, 3, 1, activation="identity")
    f = rng.normal(size=(1, 4))
    out, _ = gat_forward(f, CharGraph.empty(1), p)
    assert np.allclose(out, f @ p.W[0].T, atol=1e-15)


def test_identical_heads_repeat(rng):
    p = layer(rng, 3, 4, 1)
    twin = GatLayerParams(np.concatenate([p.W, p.W]), np.concatenate([p.a, p.a]))
    f, adj = rng.normal(size=(5, 3)), random_graph(rng, 5)
    out1, _ = gat_forward(f, adj, p)
    out2, _ = gat_forward(f, adj, twin)
    assert np.array_equal(out2, np.concatenate([out1, out1], axis=1))


@pytest.mark.parametrize("mode,activation", [("average", "elu"), ("average", "identity"),
                                             ("concat", "elu"), ("concat", "identity")])
def test_matches_dense_loop_evaluation(mode, activation):
    rng = make_rng(11)
    p = layer(rng, 4, 3, 2, mode, activation)
    f, adj = rng.normal(size=(5, 4)), random_graph(rng, 5)
    out, _ = gat_forward(f, adj, p)
    ref = dense_gat(f, adj, p.W, p.a, mode, activation, p.slope)
    assert np.max(np.abs(out - ref)) < 1e-12


def test_attention_rows_and_support(rng):
    for _ in range(10):
        n = int(rng.integers(1, 9))
        adj = random_graph(rng, n)
        p = layer(rng, 3, 2, 3)
        _, tr = gat_forward(rng.normal(size=(n, 3)), adj, p)
        assert np.all(np.abs(tr.alpha.sum(axis=2) - 1.0) < 1e-10)
        assert np.all(tr.alpha[:, ~adj] == 0.0)


def test_permutation_equivariance(rng):
    for _ in range(20):
        n = int(rng.integers(2, 9))
        adj = random_graph(rng, n)
        f = rng.normal(size=(n, 3))
        p = layer(rng, 3, 4, 2, mode=str(rng.choice(["concat", "average"])))
        perm = rng.permutation(n)
        out, _ = gat_forward(f, adj, p)
        out_p, _ = gat_forward(f[perm], adj[np.ix_(perm, perm)], p)
        assert np.allclose(out_p, out[perm], atol=1e-12)


def test_dimension_errors(rng):
    p = layer(rng, 3, 2, 2)
    with pytest.raises(ValueError):
        gat_forward(rng.normal(size=(4, 5)), np.eye(4, dtype=bool), p)
    with pytest.raises(ValueError):
        gat_forward(rng.normal(size=(4, 3)), np.eye(5, dtype=bool), p)


@pytest.mark.parametrize("seed", range(20))
def test_backward_finite_difference(seed):
    rep = gat_gradcheck(seed, "concat" if seed % 2 else "average", "elu" if seed % 3 else "identity")
    assert rep.passed, str(rep)


def test_zero_upstream_gradient(rng):
    p = layer(rng, 3, 2, 2)
    out, tr = gat_forward(rng.normal(size=(4, 3)), random_graph(rng, 4), p)
    df, dW, da = gat_backward(tr, np.zeros_like(out))
    assert not df.any() and not dW.any() and not da.any()


def test_isolated_node_gradient_is_local(rng):
    adj = random_graph(rng, 5, p=0.9)
    adj[4, :] = adj[:, 4] = False
    adj[4, 4] = True
    p = layer(rng, 3, 2, 2)
    out, tr = gat_forward(rng.normal(size=(5, 3)), adj, p)
    up = np.zeros_like(out)
    up[4] = rng.normal(size=out.shape[1])
    df, _, _ = gat_backward(tr, up)
    assert not df[:4].any() and df[4].any()


def test_stale_trace_rejected(rng):
    p = layer(rng, 3, 2, 2)
    out, tr = gat_forward(rng.normal(size=(3, 3)), random_graph(rng, 3), p)
    p.W += 0.1
    with pytest.raises(StaleTraceError):
        gat_backward(tr, out)
