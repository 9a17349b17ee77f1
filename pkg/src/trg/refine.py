"""Prediction refinement stages and boundary-guided relabeling.

The class branch re-reads the previous stage's probabilities through stacked
cross-attention layers (queries/keys from the running features, values from
the previous stage's final features). The boundary branch is a stack of
residual convolutions whose dilation doubles per layer. At inference the
detected boundaries partition the sequence and each segment takes the class
with the highest mean probability.
"""

from __future__ import annotations

import numpy as np

from . import tensor as tt
from .nn import ChannelMap, DilatedConv, Dropout, Module
from .temporal import attention_product


class CrossAttentionLayer(Module):
    """Linear attention where values come from a fixed context sequence."""

    def __init__(self, c, rng, c3=16, heads=4, dropout=0.5):
        self.c3, self.heads = c3, heads
        self.w_q = ChannelMap(c, heads * c3, rng)
        self.w_k = ChannelMap(c, heads * c3, rng)
        self.w_v = ChannelMap(c, heads * c3, rng)
        self.w_t = ChannelMap(heads * c3, c, rng)
        self.drop = Dropout(dropout)

    def __call__(self, f, context, rng, train):
        q, k = self.w_q(f), self.w_k(f)
        v = self.w_v(context)
        outs = []
        for h in range(self.heads):
            lo = h * self.c3
            outs.append(attention_product(tt.narrow(q, 0, lo, self.c3),
                                          tt.narrow(k, 0, lo, self.c3),
                                          tt.narrow(v, 0, lo, self.c3)))
        merged = tt.concat(outs, axis=0) if len(outs) > 1 else outs[0]
        out = tt.relu(tt.add(self.w_t(merged), f))
        return self.drop(out, rng, train)


class ClassRefineStage(Module):
    """Lift probabilities to C channels, attend over the context, re-softmax."""

    def __init__(self, n_classes, c, rng, layers=10, c3=16, heads=4, dropout=0.5):
        self.lift = ChannelMap(n_classes, c, rng)
        self.layers = [CrossAttentionLayer(c, rng, c3=c3, heads=heads, dropout=dropout)
                       for _ in range(layers)]
        self.head = ChannelMap(c, n_classes, rng)

    def __call__(self, prev_probs, context, rng, train):
        """Returns (refined probs Q x T, final features C x T for the next stage)."""
        f = self.lift(prev_probs)
        for layer in self.layers:
            f = layer(f, context, rng, train)
        return tt.softmax(self.head(f), axis=0), f


class BoundaryRefineStage(Module):
    """Lift to C channels, 10 residual dilated convolutions, sigmoid head.

    Dilations 2^0..2^9 with kernel 3 give a receptive field of +-1023 frames.
    """

    def __init__(self, c, rng, layers=10, dropout=0.5):
        self.lift = ChannelMap(1, c, rng)
        self.convs = [DilatedConv(c, c, 2 ** i, rng) for i in range(layers)]
        self.mixes = [ChannelMap(c, c, rng) for _ in range(layers)]
        self.drop = Dropout(dropout)
        self.head = ChannelMap(c, 1, rng)

    def __call__(self, prev_probs, rng, train):
        f = self.lift(prev_probs)
        for conv, mix in zip(self.convs, self.mixes):
            h = mix(tt.relu(conv(f)))
            f = tt.add(f, self.drop(h, rng, train))
        return tt.sigmoid(self.head(f))


# ---------------------------------------------------------------------------
# inference-time post-processing and boundary targets

def detect_boundaries(boundary_probs, threshold=0.5, window=2):
    """Frames that are local maxima within +-window and at least threshold.

    Frame 0 is a segment start by definition, never a boundary. Plateau ties
    resolve to the earliest frame of the window.
    """
    b = np.asarray(boundary_probs, dtype=np.float64).reshape(-1)
    t_len = b.shape[0]
    out = []
    for t in range(1, t_len):
        if b[t] < threshold:
            continue
        lo, hi = max(0, t - window), min(t_len, t + window + 1)
        seg = b[lo:hi]
        if b[t] == seg.max() and lo + int(np.argmax(seg)) == t:
            out.append(t)
    return out


def boundary_guided_relabel(class_probs, boundary_probs, threshold=0.5, window=2):
    """Relabel each frame with its segment's mean-probability argmax."""
    probs = np.asarray(class_probs, dtype=np.float64)
    t_len = probs.shape[1]
    cuts = detect_boundaries(boundary_probs, threshold=threshold, window=window)
    edges = [0] + cuts + [t_len]
    labels = np.empty(t_len, dtype=np.int64)
    for lo, hi in zip(edges[:-1], edges[1:]):
        labels[lo:hi] = int(np.argmax(probs[:, lo:hi].mean(axis=1)))
    return labels


def boundary_targets(labels, radius=2):
    """1 at frames where the label changes, dilated by +-radius frames."""
    labels = np.asarray(labels)
    change = np.zeros(labels.shape[0], dtype=np.float64)
    change[1:][labels[1:] != labels[:-1]] = 1.0
    if radius <= 0:
        return change
    out = np.zeros_like(change)
    for t in np.flatnonzero(change):
        out[max(0, t - radius):t + radius + 1] = 1.0
    return out
