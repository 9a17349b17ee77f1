"""Training losses: frame CE, smoothness, boundary BCE, graph supervision.

The graph-supervision pair works on segment-pooled projected features A^F:
the absolute term pushes cosine similarities toward the class-match pattern,
the relative term matches the feature-derived distance graph against the
text-derived action graph. Both use a generalized KL that stays nonnegative
for unnormalized inputs and reduces to ordinary KL on distributions.
"""

from __future__ import annotations

import numpy as np

from . import tensor as tt
from .tensor import Tensor

EPS = 1e-8


def ce_loss(probs, labels):
    """-(1/T) sum log p[label_t, t], epsilon-floored."""
    labels = np.asarray(labels)
    q, t = probs.shape
    if labels.shape != (t,):
        raise tt.ShapeError(f"labels {labels.shape} for {t} frames")
    onehot = np.zeros((q, t))
    onehot[labels, np.arange(t)] = 1.0
    picked = tt.tsum(tt.mul(probs, Tensor(onehot)), axis=0)
    return tt.mul(tt.tmean(tt.log(tt.add(picked, EPS))), -1.0)


def gs_tmse(probs, sigma=1.0, tau=4.0):
    """Smoothness penalty on adjacent-frame log-prob jumps, clamped at tau,
    weighted down where the prediction genuinely changes (Gaussian weight on
    the probability step). Fully differentiable including the weight."""
    q, t = probs.shape
    if t < 2:
        return Tensor(np.zeros(()))
    cur = tt.narrow(probs, 1, 1, t - 1)
    prev = tt.narrow(probs, 1, 0, t - 1)
    delta = tt.sub(tt.log(tt.add(cur, EPS)), tt.log(tt.add(prev, EPS)))
    clamped = tt.clamp_max(tt.absolute(delta), tau)
    step = tt.sub(cur, prev)
    sq_norm = tt.tsum(tt.mul(step, step), axis=0, keepdims=True)
    weight = tt.exp(tt.mul(sq_norm, -1.0 / (2.0 * sigma * sigma)))
    total = tt.tsum(tt.mul(weight, tt.mul(clamped, clamped)))
    return tt.div(total, float(t * q))


def boundary_bce(pred, target):
    """Mean binary cross-entropy over frames, epsilon-stabilized."""
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    flat = tt.reshape(pred, (target.shape[0],))
    pos = tt.mul(Tensor(target), tt.log(tt.add(flat, EPS)))
    neg = tt.mul(Tensor(1.0 - target), tt.log(tt.add(tt.sub(1.0, flat), EPS)))
    return tt.mul(tt.tmean(tt.add(pos, neg)), -1.0)


# ---------------------------------------------------------------------------
# segment pooling and graph supervision

def segments_from_labels(labels):
    """Maximal constant runs as (start, end_exclusive, class) tuples."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] == 0:
        raise ValueError(f"need a 1-D nonempty label sequence, got {labels.shape}")
    cuts = [0] + list(np.flatnonzero(labels[1:] != labels[:-1]) + 1) + [labels.shape[0]]
    return [(lo, hi, int(labels[lo])) for lo, hi in zip(cuts[:-1], cuts[1:])]


def segment_pool(f_r, segments):
    """Mean of F^R over each segment's frames; columns ordered as segments."""
    t = f_r.shape[1]
    cols = []
    last = 0
    for start, end, _ in segments:
        if start != last or end <= start:
            raise ValueError(f"segments must tile [0,{t}) in order")
        last = end
        cols.append(tt.tmean(tt.narrow(f_r, 1, start, end - start),
                             axis=1, keepdims=True))
    if last != t:
        raise ValueError(f"segments cover [0,{last}) but there are {t} frames")
    return tt.concat(cols, axis=1) if len(cols) > 1 else cols[0]


def class_match_matrix(class_ids):
    ids = np.asarray(class_ids)
    return (ids[:, None] == ids[None, :]).astype(np.float64)


def generalized_kl(u, w):
    """(1/N^2) sum [u log((u+eps)/(w+eps)) - u + w]; w is a constant array."""
    w = np.asarray(w, dtype=np.float64)
    ratio = tt.div(tt.add(u, EPS), Tensor(w + EPS))
    per_entry = tt.add(tt.sub(tt.mul(u, tt.log(ratio)), u), Tensor(w))
    return tt.tmean(per_entry)


def absolute_loss(a_f, a_e, class_ids):
    """Cosine-similarity matrix vs the class-match pattern, both softmax views.

    a_f: Ct x N pooled features (Tensor); a_e: Ct x N indexed text embeddings
    (constant). Row-softmax is compared against the row-normalized match
    matrix, column-softmax against the column-normalized one.
    """
    n = a_f.shape[1]
    if n < 2:
        raise ValueError("absolute supervision needs at least 2 segments")
    a_e = np.asarray(a_e, dtype=np.float64)
    norms_f_sq = tt.tsum(tt.mul(a_f, a_f), axis=0, keepdims=True)
    if (norms_f_sq.data == 0).any():
        raise ValueError("zero-norm pooled feature column")
    f_unit = tt.div(a_f, tt.sqrt(norms_f_sq))
    e_unit = a_e / np.linalg.norm(a_e, axis=0, keepdims=True)
    sim = tt.einsum("cn,cm->nm", f_unit, Tensor(e_unit))
    gt = class_match_matrix(class_ids)
    row_kl = generalized_kl(tt.softmax(sim, axis=1), gt / gt.sum(axis=1, keepdims=True))
    col_kl = generalized_kl(tt.softmax(sim, axis=0), gt / gt.sum(axis=0, keepdims=True))
    return tt.mul(tt.add(row_kl, col_kl), 0.5)


def feature_graph(a_f):
    """Differentiable inverse min-max of pairwise column distances."""
    c_t, n = a_f.shape
    left = tt.reshape(a_f, (c_t, n, 1))
    right = tt.reshape(a_f, (c_t, 1, n))
    diff = tt.sub(left, right)
    d_sq = tt.tsum(tt.mul(diff, diff), axis=0)
    dist = tt.sqrt(tt.add(d_sq, 1e-12))
    lo, hi = tt.tmin(dist), tt.tmax(dist)
    span = tt.sub(hi, lo)
    if span.data == 0:
        return Tensor(np.ones((n, n)))
    return tt.sub(1.0, tt.div(tt.sub(dist, lo), span))


def relative_loss(a_f, class_ids, action_graph):
    """KL between the feature distance graph and the indexed action graph."""
    ids = np.asarray(class_ids)
    if ids.shape[0] < 2:
        raise ValueError("relative supervision needs at least 2 segments")
    g_e = np.asarray(action_graph)[np.ix_(ids, ids)]
    return generalized_kl(feature_graph(a_f), g_e)


def total_loss(outputs, labels, boundary_target, action_graph, action_emb,
               lambda_abs=1.0, lambda_rel=1.0, sigma=1.0, tau=4.0):
    """Sum over stages plus weighted graph supervision on the representation.

    Returns (scalar Tensor, dict of per-component float values). Sequences
    with a single ground-truth segment skip the graph terms (they need at
    least two pooled features).
    """
    labels = np.asarray(labels)
    parts = {}
    total = Tensor(np.zeros(()))
    for i, probs in enumerate(outputs.class_stages):
        ce = ce_loss(probs, labels)
        sm = gs_tmse(probs, sigma=sigma, tau=tau)
        parts[f"ce_{i}"] = ce.item()
        parts[f"gs_tmse_{i}"] = sm.item()
        total = tt.add(total, tt.add(ce, sm))
    for i, bnd in enumerate(outputs.boundary_stages):
        bce = boundary_bce(bnd, boundary_target)
        parts[f"bce_{i}"] = bce.item()
        total = tt.add(total, bce)
    segments = segments_from_labels(labels)
    if len(segments) >= 2 and (lambda_abs or lambda_rel):
        ids = [cls for _, _, cls in segments]
        a_f = segment_pool(outputs.representation, segments)
        a_e = np.asarray(action_emb)[:, ids]
        if lambda_abs:
            ab = absolute_loss(a_f, a_e, ids)
            parts["absolute"] = ab.item()
            total = tt.add(total, tt.mul(ab, lambda_abs))
        if lambda_rel:
            rel = relative_loss(a_f, ids, action_graph)
            parts["relative"] = rel.item()
            total = tt.add(total, tt.mul(rel, lambda_rel))
    parts["total"] = total.item()
    return total, parts
