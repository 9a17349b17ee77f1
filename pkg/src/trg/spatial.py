"""Spatial feature extraction over the skeleton graph.

A multi-scale GCN mixes joints at shortest-path distances 1..K, then an
adaptive block combines the static text-derived joint graph with two dynamic
graphs built from pairwise differences of pooled features: one per frame and
one per channel group.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as tt
from .nn import BatchNorm, ChannelMap, Module
from .tensor import Tensor

ADJ_EPS = 0.001  # added to every degree so empty rows stay invertible


@dataclass(frozen=True)
class SkeletonTopology:
    """Joint labels plus undirected bone edges (0-based index pairs)."""

    joints: tuple
    edges: tuple

    def __post_init__(self):
        v = len(self.joints)
        if v < 2:
            raise ValueError("topology needs at least 2 joints")
        if len(set(self.joints)) != v:
            raise ValueError("duplicate joint labels")
        for i, j in self.edges:
            if not (0 <= i < v and 0 <= j < v) or i == j:
                raise ValueError(f"bad edge ({i},{j}) for {v} joints")
        if self.distances().max() >= v + 1:
            raise ValueError("skeleton graph is not connected")

    @property
    def n_joints(self):
        return len(self.joints)

    def distances(self):
        """All-pairs shortest-path hop counts by BFS; unreachable = V+1."""
        v = len(self.joints)
        adj = [[] for _ in range(v)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        dist = np.full((v, v), v + 1, dtype=np.int64)
        for s in range(v):
            dist[s, s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if dist[s, w] > dist[s, u] + 1:
                        dist[s, w] = dist[s, u] + 1
                        queue.append(w)
        return dist

    def diameter(self):
        return int(self.distances().max())


def load_topology(path):
    spec = json.loads(Path(path).read_text())
    return SkeletonTopology(joints=tuple(spec["joints"]),
                            edges=tuple((int(i), int(j)) for i, j in spec["edges"]))


def k_adjacency(topology, k):
    """0/1 matrix marking pairs at shortest-path distance exactly k, plus self."""
    if k < 0:
        raise ValueError(f"scale k must be nonnegative, got {k}")
    dist = topology.distances()
    return ((dist == k) | np.eye(topology.n_joints, dtype=bool)).astype(np.float64)


def normalize_adjacency(a):
    """Symmetric normalization with degree damping: D^{-1/2} (A) D^{-1/2}."""
    a = np.asarray(a, dtype=np.float64)
    if (a < 0).any():
        raise ValueError("adjacency must be nonnegative")
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1) + ADJ_EPS)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def multiscale_adjacency(topology, k_max):
    """Column-concatenated normalized k-adjacencies for k = 1..K; shape V x KV."""
    if k_max < 1:
        raise ValueError(f"need at least one scale, got K={k_max}")
    blocks = [normalize_adjacency(k_adjacency(topology, k)) for k in range(1, k_max + 1)]
    return np.hstack(blocks)


class SpatialBlock(Module):
    """Multi-scale GCN followed by text-adaptive graph convolution.

    Input (C0, T, V) raw features, output (C, T, V). The text-derived joint
    graph is fixed; B (over the multi-scale columns) and the two dynamic
    graph heads are trainable. C must divide into C1 contiguous channel
    groups for the channel-level graphs.
    """

    def __init__(self, topology, joint_graph, c0, c, c1, k_max, rng):
        v = topology.n_joints
        if joint_graph.shape != (v, v):
            raise tt.ShapeError(
                f"joint graph {joint_graph.shape} vs topology with {v} joints")
        if c % c1:
            raise ValueError(f"C={c} not divisible into C1={c1} channel groups")
        self.v = v
        self.c0, self.c, self.c1 = c0, c, c1
        self.k_max = k_max
        self.a_ms = Tensor(multiscale_adjacency(topology, k_max))
        self.tjg = Tensor(np.asarray(joint_graph, dtype=np.float64))
        self.b = Tensor(np.zeros((v, k_max * v)), requires_grad=True)
        self.w_s = ChannelMap(k_max * c0, c, rng)
        self.f_j = ChannelMap(c, c, rng)
        self.p_head = ChannelMap(c, c1, rng)
        self.q_head = ChannelMap(c, c1, rng)
        self.bn = BatchNorm(c)

    def multiscale_forward(self, x):
        """F^g = ReLU(W_s applied to the multi-scale-mixed input)."""
        if x.ndim != 3 or x.shape[0] != self.c0 or x.shape[2] != self.v:
            raise tt.ShapeError(f"expected ({self.c0}, T, {self.v}) input, got {x.shape}")
        t = x.shape[1]
        mixed = tt.einsum("ctv,vu->ctu", x, tt.add(self.a_ms, self.b))
        # (C0, T, K*V) -> (K*C0, T, V) stacking the K scale slabs on channels
        mixed = tt.reshape(mixed, (self.c0, t, self.k_max, self.v))
        mixed = tt.transpose(mixed, (2, 0, 1, 3))
        mixed = tt.reshape(mixed, (self.k_max * self.c0, t, self.v))
        return tt.relu(self.w_s(mixed))

    def adaptive_graphs(self, f_g):
        """Dynamic graphs from pooled pairwise differences.

        Returns (G^M: T x V x V from channel-pooled heads,
                 G^N: C1 x V x V from time-pooled heads).
        """
        p = self.p_head(f_g)
        q = self.q_head(f_g)
        p_m = tt.tmean(p, axis=0)  # (T, V)
        q_m = tt.tmean(q, axis=0)
        p_n = tt.tmean(p, axis=1)  # (C1, V)
        q_n = tt.tmean(q, axis=1)
        t, v = p_m.shape
        g_m = tt.sub(tt.reshape(p_m, (t, v, 1)), tt.reshape(q_m, (t, 1, v)))
        c1 = p_n.shape[0]
        g_n = tt.sub(tt.reshape(p_n, (c1, v, 1)), tt.reshape(q_n, (c1, 1, v)))
        return g_m, g_n

    def adaptive_forward(self, f_g, train):
        """Graph convolution through frame-level and channel-level graphs."""
        g_m, g_n = self.adaptive_graphs(f_g)
        g_t = tt.add(g_m, self.tjg)               # (T, V, V)
        g_c = tt.add(g_n, self.tjg)               # (C1, V, V)
        f_j = self.f_j(f_g)                       # (C, T, V)
        t = f_j.shape[1]
        frame = tt.einsum("ctu,tuv->ctv", f_j, g_t)
        grouped = tt.reshape(f_j, (self.c1, self.c // self.c1, t, self.v))
        chan = tt.einsum("gdtu,guv->gdtv", grouped, g_c)
        chan = tt.reshape(chan, (self.c, t, self.v))
        return tt.relu(self.bn(tt.add(frame, chan), train))

    def __call__(self, x, train):
        return self.adaptive_forward(self.multiscale_forward(x), train)
