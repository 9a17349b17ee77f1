"""Topology handling, multi-scale mixing, and the adaptive spatial block."""

import json

import numpy as np
import pytest

from conftest import fd_param_check, random_graph, scalar_readout
from trg import tensor as tt
from trg.spatial import (SkeletonTopology, SpatialBlock, k_adjacency, load_topology,
                         multiscale_adjacency, normalize_adjacency)
from trg.tensor import Tensor


def test_chain_distances_and_diameter(chain4):
    d = chain4.distances()
    assert d[0, 3] == 3 and d[1, 2] == 1 and d[2, 2] == 0
    assert chain4.diameter() == 3


def test_disconnected_topology_rejected():
    with pytest.raises(ValueError, match="connected"):
        SkeletonTopology(joints=("a", "b", "c"), edges=((0, 1),))


def test_bad_edge_rejected():
    with pytest.raises(ValueError):
        SkeletonTopology(joints=("a", "b"), edges=((0, 2),))
    with pytest.raises(ValueError):
        SkeletonTopology(joints=("a", "b"), edges=((1, 1),))


def test_topology_json_round_trip(tmp_path, chain4):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps({"joints": list(chain4.joints),
                                "edges": [list(e) for e in chain4.edges]}))
    loaded = load_topology(path)
    assert loaded == chain4


def test_k_adjacency_zero_is_identity(chain4):
    assert np.array_equal(k_adjacency(chain4, 0), np.eye(4))


def test_k_adjacency_chain3():
    chain3 = SkeletonTopology(("a", "b", "c"), ((0, 1), (1, 2)))
    a1 = k_adjacency(chain3, 1)
    want1 = np.eye(3)
    want1[0, 1] = want1[1, 0] = want1[1, 2] = want1[2, 1] = 1
    assert np.array_equal(a1, want1)
    a2 = k_adjacency(chain3, 2)
    want2 = np.eye(3)
    want2[0, 2] = want2[2, 0] = 1
    assert np.array_equal(a2, want2)


def test_k_adjacency_negative_rejected(chain4):
    with pytest.raises(ValueError):
        k_adjacency(chain4, -1)


def test_k_adjacency_scales_tile_tree_pairs(chain4):
    total = sum(k_adjacency(chain4, k) - np.eye(4) for k in range(1, 4))
    assert np.array_equal(total + np.eye(4), np.ones((4, 4)))


def test_normalize_adjacency_identity():
    got = normalize_adjacency(np.eye(2))
    assert np.allclose(got, np.eye(2) / 1.001)


def test_normalize_adjacency_zero_row_finite():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1
    got = normalize_adjacency(a)
    assert np.isfinite(got).all()


def test_normalize_adjacency_matches_direct_formula():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = (rng.random((5, 5)) < 0.4).astype(float)
        a = np.maximum(a, a.T)
        want = np.zeros((5, 5))
        for i in range(5):
            for j in range(5):
                di = a[i].sum() + 0.001
                dj = a[j].sum() + 0.001
                want[i, j] = a[i, j] / np.sqrt(di * dj)
        assert np.abs(normalize_adjacency(a) - want).max() < 1e-12


def test_normalize_preserves_symmetry(chain4):
    for k in range(4):
        n = normalize_adjacency(k_adjacency(chain4, k))
        assert np.abs(n - n.T).max() < 1e-15


def test_multiscale_adjacency_shape(chain4):
    a = multiscale_adjacency(chain4, 3)
    assert a.shape == (4, 12)
    assert np.allclose(a[:, :4], normalize_adjacency(k_adjacency(chain4, 1)))


def _block(topology, seed=0, c0=2, c=8, c1=2, k_max=None):
    if k_max is None:
        k_max = topology.diameter()
    g = random_graph(topology.n_joints, seed=seed)
    return SpatialBlock(topology, g, c0, c, c1, k_max,
                        np.random.default_rng(seed))


def test_multiscale_forward_shape(chain4):
    block = _block(chain4)
    x = Tensor(np.random.default_rng(1).standard_normal((2, 5, 4)))
    assert block.multiscale_forward(x).shape == (8, 5, 4)


def test_multiscale_forward_matches_loop_oracle(chain4):
    block = _block(chain4, seed=2)
    rng = np.random.default_rng(3)
    block.b = Tensor(rng.standard_normal(block.b.shape) * 0.1, requires_grad=True)
    x = rng.standard_normal((2, 3, 4))
    got = block.multiscale_forward(Tensor(x)).data

    a = block.a_ms.data + block.b.data          # (V, K*V)
    k_max, v, c0 = block.k_max, 4, 2
    mixed = np.einsum("ctv,vu->ctu", x, a)      # (C0, T, K*V)
    stacked = np.zeros((k_max * c0, 3, v))
    for k in range(k_max):
        for ch in range(c0):
            stacked[k * c0 + ch] = mixed[ch, :, k * v:(k + 1) * v]
    w, bias = block.w_s.weight.data, block.w_s.bias.data
    want = np.maximum(np.einsum("oc,ctv->otv", w, stacked) + bias[:, None, None], 0)
    assert np.abs(got - want).max() < 1e-10


def test_constant_input_stays_constant_on_regular_graph():
    # triangle: every joint has degree 2, so normalized mixing of a joint-
    # constant signal is joint-constant
    tri = SkeletonTopology(("a", "b", "c"), ((0, 1), (1, 2), (0, 2)))
    block = _block(tri, seed=4, c0=2, c=8, c1=2)
    x = np.ones((2, 4, 3)) * np.arange(1, 5)[None, :, None]
    out = block.multiscale_forward(Tensor(x)).data
    assert np.abs(out - out[:, :, :1]).max() < 1e-9


def test_adaptive_graphs_match_loop_oracle(chain4):
    block = _block(chain4, seed=5, c0=2, c=8, c1=2)
    rng = np.random.default_rng(6)
    f_g = rng.standard_normal((8, 3, 4))
    g_m, g_n = block.adaptive_graphs(Tensor(f_g))

    wp, bp = block.p_head.weight.data, block.p_head.bias.data
    wq, bq = block.q_head.weight.data, block.q_head.bias.data
    p = np.einsum("oc,ctv->otv", wp, f_g) + bp[:, None, None]
    q = np.einsum("oc,ctv->otv", wq, f_g) + bq[:, None, None]
    pm, qm = p.mean(axis=0), q.mean(axis=0)      # (T, V)
    pn, qn = p.mean(axis=1), q.mean(axis=1)      # (C1, V)
    for t in range(3):
        for i in range(4):
            for j in range(4):
                assert abs(g_m.data[t, i, j] - (pm[t, i] - qm[t, j])) < 1e-12
    for c in range(2):
        for i in range(4):
            for j in range(4):
                assert abs(g_n.data[c, i, j] - (pn[c, i] - qn[c, j])) < 1e-12


def test_shared_heads_give_antisymmetric_graphs(chain4):
    block = _block(chain4, seed=7)
    block.q_head = block.p_head
    f_g = Tensor(np.random.default_rng(8).standard_normal((8, 3, 4)))
    g_m, g_n = block.adaptive_graphs(f_g)
    assert np.abs(g_m.data + np.swapaxes(g_m.data, 1, 2)).max() < 1e-12
    assert np.abs(g_n.data + np.swapaxes(g_n.data, 1, 2)).max() < 1e-12


def test_constant_feature_shared_heads_zero_graphs(chain4):
    block = _block(chain4, seed=9)
    block.q_head = block.p_head
    f_g = Tensor(np.full((8, 3, 4), 0.7))
    g_m, g_n = block.adaptive_graphs(f_g)
    assert np.abs(g_m.data).max() < 1e-12 and np.abs(g_n.data).max() < 1e-12


def test_adaptive_forward_matches_loop_oracle(chain4):
    block = _block(chain4, seed=10, c0=2, c=8, c1=2)
    rng = np.random.default_rng(11)
    f_g = rng.standard_normal((8, 3, 4))
    got = block.adaptive_forward(Tensor(f_g), train=True).data

    g_m, g_n = block.adaptive_graphs(Tensor(f_g))
    g_t = g_m.data + block.tjg.data
    g_c = g_n.data + block.tjg.data
    wj, bj = block.f_j.weight.data, block.f_j.bias.data
    f_j = np.einsum("oc,ctv->otv", wj, f_g) + bj[:, None, None]
    pre = np.zeros_like(f_j)
    group_size = 8 // 2
    for t in range(3):
        pre[:, t, :] += f_j[:, t, :] @ g_t[t]
    for c in range(8):
        g = c // group_size
        for t in range(3):
            pre[c, t, :] += f_j[c, t, :] @ g_c[g]
    mu = pre.mean(axis=(1, 2), keepdims=True)
    var = pre.var(axis=(1, 2), keepdims=True)
    want = np.maximum((pre - mu) / np.sqrt(var + 1e-5), 0)
    assert np.abs(got - want).max() < 1e-8


def test_identity_graph_zero_heads_doubles_fj(chain4):
    block = _block(chain4, seed=12)
    block.tjg = Tensor(np.eye(4))
    for head in (block.p_head, block.q_head):
        head.weight = Tensor(np.zeros(head.weight.shape), requires_grad=True)
        head.bias = Tensor(np.zeros(head.bias.shape), requires_grad=True)
    f_g = Tensor(np.abs(np.random.default_rng(13).standard_normal((8, 3, 4))))
    out = block.adaptive_forward(f_g, train=False)  # eval BN: fresh stats are (0,1)
    wj, bj = block.f_j.weight.data, block.f_j.bias.data
    f_j = np.einsum("oc,ctv->otv", wj, f_g.data) + bj[:, None, None]
    want = np.maximum(2 * f_j / np.sqrt(1 + 1e-5), 0)
    assert np.abs(out.data - want).max() < 1e-9


def test_null_path_when_everything_zeroed(chain4):
    block = _block(chain4, seed=14)
    block.tjg = Tensor(np.zeros((4, 4)))
    for head in (block.p_head, block.q_head, block.f_j):
        head.weight = Tensor(np.zeros(head.weight.shape), requires_grad=True)
        head.bias = Tensor(np.zeros(head.bias.shape), requires_grad=True)
    f_g = Tensor(np.random.default_rng(15).standard_normal((8, 3, 4)))
    out = block.adaptive_forward(f_g, train=True)
    assert np.abs(out.data).max() == 0.0


def test_wrong_joint_count_rejected(chain4):
    block = _block(chain4)
    with pytest.raises(tt.ShapeError):
        block.multiscale_forward(Tensor(np.zeros((2, 5, 7))))
    with pytest.raises(tt.ShapeError):
        SpatialBlock(chain4, np.eye(3), 2, 8, 2, 2, np.random.default_rng(0))


def test_channel_group_divisibility_enforced(chain4):
    with pytest.raises(ValueError, match="divisible"):
        SpatialBlock(chain4, np.eye(4), 2, 9, 2, 2, np.random.default_rng(0))


def test_spatial_block_gradients(chain4):
    block = _block(chain4, seed=16, c0=2, c=4, c1=2, k_max=2)
    x = Tensor(np.random.default_rng(17).standard_normal((2, 4, 4)))
    fd_param_check(
        block,
        lambda m: scalar_readout(m(x, train=True)),
        ["b", "w_s.weight", "f_j.weight", "f_j.bias", "p_head.weight",
         "q_head.weight", "bn.gamma", "bn.beta"])
