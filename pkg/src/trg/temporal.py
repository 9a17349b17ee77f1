"""Temporal backbone: spatial merge, linear attention, per-layer fusion.

Each of the L layers gets its own view of the spatial features (a merge of
the joint axis into channels), fuses it with the running temporal feature,
and refines with sigmoid-kernel linear attention. Attention cost is linear
in T because the value/key product is contracted first.
"""

from __future__ import annotations

from . import tensor as tt
from .nn import ChannelMap, Dropout, Module


def attention_product(q, k, v):
    """Kernelized attention for channel-first (d, T) projections.

    out[:, t] is the phi-weighted average of value frames,
    sum_s phi(q_t).phi(k_s) v[:, s] / sum_s phi(q_t).phi(k_s), with
    phi = sigmoid, so every output frame is a convex mix of value frames
    and the magnitude never grows with sequence length. Accumulating
    phi(K)^T V and the key sums first keeps the cost linear in T; the
    quadratic association that materializes the T x T weight matrix is
    kept only as a test oracle.
    """
    pk = tt.sigmoid(k)
    pq = tt.sigmoid(q)
    vk = tt.einsum("ct,dt->cd", v, pk)
    num = tt.einsum("cd,dt->ct", vk, pq)
    ksum = tt.tsum(pk, axis=1, keepdims=True)
    z = tt.einsum("dz,dt->zt", ksum, pq)
    return tt.div(num, z)


class LinearAttention(Module):
    """Multi-head linear attention with output projection and ReLU residual."""

    def __init__(self, c, rng, c3=16, heads=4):
        self.c3, self.heads = c3, heads
        self.w_q = ChannelMap(c, heads * c3, rng)
        self.w_k = ChannelMap(c, heads * c3, rng)
        self.w_v = ChannelMap(c, heads * c3, rng)
        self.w_t = ChannelMap(heads * c3, c, rng)

    def __call__(self, f):
        q, k, v = self.w_q(f), self.w_k(f), self.w_v(f)
        outs = []
        for h in range(self.heads):
            lo = h * self.c3
            outs.append(attention_product(tt.narrow(q, 0, lo, self.c3),
                                          tt.narrow(k, 0, lo, self.c3),
                                          tt.narrow(v, 0, lo, self.c3)))
        merged = tt.concat(outs, axis=0) if len(outs) > 1 else outs[0]
        return tt.relu(tt.add(self.w_t(merged), f))


class TemporalLayer(Module):
    """One backbone layer: merge heads, optional fusion, attention, dropout."""

    def __init__(self, c, v, rng, c2=8, c3=16, heads=4, dropout=0.5, with_fusion=True):
        self.c, self.v, self.c2 = c, v, c2
        self.merge_a = ChannelMap(c, c2, rng)
        self.merge_b = ChannelMap(c2 * v, c, rng)
        if with_fusion:
            self.w_f = ChannelMap(2 * c, c, rng)
            self.w_l = ChannelMap(c, c, rng)
        else:
            self.w_f = self.w_l = None
        self.attn = LinearAttention(c, rng, c3=c3, heads=heads)
        self.drop = Dropout(dropout)

    def merge_spatial(self, f_s):
        """(C, T, V) -> (C, T): joints folded into channels then remapped."""
        t = f_s.shape[1]
        h = self.merge_a(f_s)                       # (C2, T, V)
        h = tt.transpose(h, (0, 2, 1))              # (C2, V, T)
        h = tt.reshape(h, (self.c2 * self.v, t))
        return self.merge_b(h)

    def fuse(self, f_s_l, prev):
        """GeLU((F^s_l ++ F^t_{l-1}) W_f W_l) + F^t_{l-1}."""
        if f_s_l.shape != prev.shape:
            raise tt.ShapeError(f"fusion shapes differ: {f_s_l.shape} vs {prev.shape}")
        mixed = self.w_l(self.w_f(tt.concat([f_s_l, prev], axis=0)))
        return tt.add(tt.gelu(mixed), prev)

    def __call__(self, f_s, prev, rng, train):
        f_s_l = self.merge_spatial(f_s)
        f_st = f_s_l if prev is None else self.fuse(f_s_l, prev)
        f_t = self.attn(f_st)
        return self.drop(f_t, rng, train)


class TemporalBackbone(Module):
    """L stacked layers plus frame-wise class and boundary heads."""

    def __init__(self, c, v, n_classes, rng, layers=10, c2=8, c3=16, heads=4,
                 dropout=0.5):
        if layers < 1:
            raise ValueError("need at least one temporal layer")
        self.layers = [TemporalLayer(c, v, rng, c2=c2, c3=c3, heads=heads,
                                     dropout=dropout, with_fusion=(i > 0))
                       for i in range(layers)]
        self.cls_head = ChannelMap(c, n_classes, rng)
        self.bnd_head = ChannelMap(c, 1, rng)

    def __call__(self, f_s, rng, train):
        """Returns (F^t_L: (C,T), class probs (Q,T), boundary probs (1,T))."""
        prev = None
        for layer in self.layers:
            prev = layer(f_s, prev, rng, train)
        y_cls = tt.softmax(self.cls_head(prev), axis=0)
        y_bnd = tt.sigmoid(self.bnd_head(prev))
        return prev, y_cls, y_bnd
