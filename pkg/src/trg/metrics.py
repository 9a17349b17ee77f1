"""Frame accuracy, segmental edit score, and segmental F1@k.

Segment-level metrics compare run-length encodings: the edit score is a
normalized Levenshtein distance over segment class sequences; F1@k matches
each predicted segment greedily to the unmatched ground-truth segment of the
same class with the highest IoU and counts it correct when IoU >= k.
"""

from __future__ import annotations

import numpy as np

F1_THRESHOLDS = (0.10, 0.25, 0.50)


def run_length_encode(labels):
    """Segment class sequence plus (start, end) spans."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] == 0:
        raise ValueError(f"need a nonempty 1-D label sequence, got {labels.shape}")
    cuts = [0] + list(np.flatnonzero(labels[1:] != labels[:-1]) + 1) + [len(labels)]
    classes = [int(labels[lo]) for lo in cuts[:-1]]
    spans = list(zip(cuts[:-1], cuts[1:]))
    return classes, spans


def frame_accuracy(pred, gt):
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: pred {pred.shape} vs gt {gt.shape}")
    return 100.0 * float((pred == gt).mean())


def levenshtein(a, b):
    """Classic dynamic program over two token sequences."""
    la, lb = len(a), len(b)
    row = list(range(lb + 1))
    for i in range(1, la + 1):
        prev_diag, row[0] = row[0], i
        for j in range(1, lb + 1):
            sub = prev_diag + (a[i - 1] != b[j - 1])
            prev_diag = row[j]
            row[j] = min(sub, row[j] + 1, row[j - 1] + 1)
    return row[lb]


def edit_score(pred, gt):
    """100 * (1 - segment-sequence edit distance / longer length)."""
    p, _ = run_length_encode(pred)
    g, _ = run_length_encode(gt)
    return 100.0 * (1.0 - levenshtein(p, g) / max(len(p), len(g)))


def _segment_iou(span_a, span_b):
    inter = max(0, min(span_a[1], span_b[1]) - max(span_a[0], span_b[0]))
    union = max(span_a[1], span_b[1]) - min(span_a[0], span_b[0])
    return inter / union


def f1_at_k(pred, gt, k, ignore_class=None):
    """Greedy IoU matching; each ground-truth segment is usable once."""
    p_cls, p_spans = run_length_encode(pred)
    g_cls, g_spans = run_length_encode(gt)
    if ignore_class is not None:
        p = [(c, s) for c, s in zip(p_cls, p_spans) if c != ignore_class]
        g = [(c, s) for c, s in zip(g_cls, g_spans) if c != ignore_class]
        p_cls, p_spans = [c for c, _ in p], [s for _, s in p]
        g_cls, g_spans = [c for c, _ in g], [s for _, s in g]
    used = [False] * len(g_cls)
    tp = 0
    for c, span in zip(p_cls, p_spans):
        best, best_iou = -1, 0.0
        for j, (gc, gspan) in enumerate(zip(g_cls, g_spans)):
            if used[j] or gc != c:
                continue
            iou = _segment_iou(span, gspan)
            if iou > best_iou:
                best, best_iou = j, iou
        if best >= 0 and best_iou >= k:
            used[best] = True
            tp += 1
    fp = len(p_cls) - tp
    fn = len(g_cls) - tp
    if tp + fp + fn == 0:
        return 100.0  # both sides empty after filtering
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 100.0 * 2 * precision * recall / (precision + recall)


def sequence_metrics(pred, gt, ignore_class=None):
    out = {"acc": frame_accuracy(pred, gt),
           "edit": edit_score(pred, gt)}
    for k in F1_THRESHOLDS:
        out[f"f1_{int(k * 100)}"] = f1_at_k(pred, gt, k, ignore_class=ignore_class)
    return out


def aggregate_metrics(pairs, ignore_class=None):
    """Dataset-level report: accuracy weighted by frames, edit/F1 averaged
    per sequence (the reporting convention segmentation papers follow)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no sequences to score")
    total_frames = 0
    correct = 0.0
    per_seq = []
    for pred, gt in pairs:
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise ValueError(f"length mismatch: {pred.shape} vs {gt.shape}")
        total_frames += pred.shape[0]
        correct += float((pred == gt).sum())
        per_seq.append(sequence_metrics(pred, gt, ignore_class=ignore_class))
    report = {"acc": 100.0 * correct / total_frames,
              "edit": float(np.mean([m["edit"] for m in per_seq]))}
    for k in F1_THRESHOLDS:
        key = f"f1_{int(k * 100)}"
        report[key] = float(np.mean([m[key] for m in per_seq]))
    return report
