"""Training loop, Adam optimizer, and checkpoint evaluation.

Sequences have unequal lengths, so there is no padding: gradients accumulate
one sequence at a time and the optimizer steps once per batch. The loop is
deterministic given the config seed; set TRG_THREADS=1 for the reference
single-threaded mode used by the reproducibility tests.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np
import threadpoolctl

from . import checkpoint as ckpt
from . import losses
from .config import RunConfig, save_config
from .data import load_dataset, preprocess
from .augment import AugmentConfig, apply_saep
from .metrics import aggregate_metrics
from .model import SegmentationModel
from .refine import boundary_guided_relabel, boundary_targets
from .spatial import load_topology
from .tensor import Tape, Tensor
from .textgraph import build_relational_graph, load_embedding_file


def limit_threads():
    """Cap BLAS worker threads to $TRG_THREADS if the variable is set."""
    raw = os.environ.get("TRG_THREADS")
    if not raw:
        return
    threadpoolctl.threadpool_limits(limits=max(1, int(raw)))


class Adam:
    """Adaptive-moment gradient descent, the usual bias-corrected form."""

    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, scale=1.0):
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad * scale
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1 ** self.t)
            v_hat = self.v[i] / (1 - self.b2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _load_assets(config):
    topology = load_topology(config.topology)
    joint_emb = load_embedding_file(config.joint_embeddings)
    if len(joint_emb.labels) != topology.n_joints:
        raise ValueError(f"{config.joint_embeddings}: {len(joint_emb.labels)} "
                         f"embeddings for {topology.n_joints} joints")
    joint_graph = build_relational_graph(joint_emb).matrix
    action_emb = load_embedding_file(config.action_embeddings)
    action_graph = build_relational_graph(action_emb).matrix
    return topology, joint_graph, action_emb, action_graph


def _build_model(config, topology, joint_graph, n_classes, rng):
    return SegmentationModel(
        topology, joint_graph, n_classes, rng,
        c0=config.c0, c=config.c, c1=config.c1, c2=config.c2, c3=config.c3,
        heads=config.heads, c_t=config.c_t,
        temporal_layers=config.temporal_layers,
        k_max=config.k_max or None,
        class_stages=config.class_stages,
        boundary_stages=config.boundary_stages,
        refine_layers=config.refine_layers,
        dropout=config.dropout)


def _prepared_inputs(config, sequences, topology, n_classes):
    """Preprocess raw positions and pin per-sequence training targets."""
    prepared = []
    for seq in sequences:
        if seq.n_joints != topology.n_joints:
            raise ValueError(f"{seq.id}: {seq.n_joints} joints, topology has "
                             f"{topology.n_joints}")
        if seq.labels.max() >= n_classes:
            raise ValueError(f"{seq.id}: label {seq.labels.max()} for "
                             f"{n_classes} classes")
        x = preprocess(seq.x, root=config.root_joint)
        if x.shape[0] != config.c0:
            raise ValueError(f"{seq.id}: preprocessing gives {x.shape[0]} "
                             f"channels, config.c0 is {config.c0}")
        prepared.append((seq.id, x,
                         seq.labels,
                         boundary_targets(seq.labels, radius=config.boundary_radius)))
    return prepared


def _predict(model, x, rng, config):
    out = model(Tensor(x), rng, train=False)
    return boundary_guided_relabel(out.final_classes.data,
                                   out.final_boundaries.data,
                                   threshold=config.boundary_threshold)


def _train_set_metrics(model, prepared, rng, config):
    pairs = [(_predict(model, x, rng, config), labels)
             for _, x, labels, _ in prepared]
    return aggregate_metrics(pairs)


def train(config, log_stream=None):
    """Fit a model on config.data_dir; returns a small result record.

    Writes out_dir/config.json, out_dir/train_log.jsonl (one JSON object per
    epoch with every loss component and the running throughput), and
    out_dir/model.trgw. A non-finite loss aborts with the component values
    in the message.
    """
    limit_threads()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    topology, joint_graph, action_emb, action_graph = _load_assets(config)
    sequences, action_names = load_dataset(config.data_dir)
    n_classes = len(action_names)
    if len(action_emb.labels) != n_classes:
        raise ValueError(f"{config.action_embeddings}: {len(action_emb.labels)} "
                         f"embeddings for {n_classes} classes")
    prepared = _prepared_inputs(config, sequences, topology, n_classes)

    rng = np.random.default_rng(config.seed)
    model = _build_model(config, topology, joint_graph, n_classes, rng)
    optimizer = Adam(model.parameters(), lr=config.learning_rate)
    aug = AugmentConfig(alpha=config.alpha if config.augment else 0.0,
                        beta=config.beta if config.augment else 0.0,
                        axis=config.rotation_axis)
    action_emb_cols = action_emb.matrix.T  # (dim, Q), classes as columns

    save_config(out_dir / "config.json", config)
    log_path = out_dir / "train_log.jsonl"
    epoch_losses = []
    start = time.time()
    with open(log_path, "w") as log:
        for epoch in range(config.epochs):
            order = rng.permutation(len(prepared))
            inputs = apply_saep([prepared[i][1] for i in order], aug, rng,
                                train=True)
            sums, counts = {}, 0
            optimizer.zero_grad()
            pending = 0
            for j, idx in enumerate(order):
                seq_id, _, labels, bnd_target = prepared[idx]
                with Tape() as tape:
                    out = model(Tensor(inputs[j]), rng, train=True)
                    loss, parts = losses.total_loss(
                        out, labels, bnd_target, action_graph, action_emb_cols,
                        lambda_abs=config.lambda_abs,
                        lambda_rel=config.lambda_rel,
                        sigma=config.sigma, tau=config.tau)
                    if not np.isfinite(parts["total"]):
                        raise RuntimeError(
                            f"non-finite loss on {seq_id} at epoch {epoch}: "
                            f"{json.dumps(parts)}")
                    tape.backward(loss)
                pending += 1
                for k, v in parts.items():
                    sums[k] = sums.get(k, 0.0) + v
                counts += 1
                if pending == config.batch_size or j == len(order) - 1:
                    optimizer.step(scale=1.0 / pending)
                    optimizer.zero_grad()
                    pending = 0
            record = {"epoch": epoch,
                      "seconds": round(time.time() - start, 3)}
            record.update({k: sums[k] / counts for k in sorted(sums)})
            epoch_losses.append(record["total"])
            if config.target_acc:
                report = _train_set_metrics(model, prepared, rng, config)
                record["train_acc"] = report["acc"]
                record["train_edit"] = report["edit"]
            log.write(json.dumps(record) + "\n")
            log.flush()
            if log_stream is not None:
                print(f"epoch {epoch}: loss {record['total']:.4f}"
                      + (f" acc {record.get('train_acc', 0):.1f}"
                         if config.target_acc else ""),
                      file=log_stream)
            if config.target_acc and record["train_acc"] >= config.target_acc:
                break

    checkpoint_path = out_dir / "model.trgw"
    ckpt.save_model(checkpoint_path, model)
    return {"checkpoint": str(checkpoint_path),
            "log": str(log_path),
            "epochs_run": len(epoch_losses),
            "epoch_losses": epoch_losses,
            "seconds": time.time() - start}


def load_trained(checkpoint_path):
    """Rebuild the model recorded next to a checkpoint and load its weights."""
    checkpoint_path = Path(checkpoint_path)
    config_path = checkpoint_path.parent / "config.json"
    if not config_path.exists():
        raise FileNotFoundError(f"{config_path}: no config next to checkpoint")
    from .config import load_config
    config = load_config(config_path)
    topology, joint_graph, action_emb, _ = _load_assets(config)
    n_classes = len(action_emb.labels)
    model = _build_model(config, topology, joint_graph, n_classes,
                         np.random.default_rng(config.seed))
    ckpt.load_model(checkpoint_path, model)
    return model, config, topology


def evaluate(checkpoint_path, data_dir, out_dir=None):
    """Eval-mode predictions plus metrics; never mutates the checkpoint.

    Runs the plain forward pass (no augmentation, no dropout), applies the
    boundary-guided relabeling, and reports frame accuracy, edit score, and
    F1 at the standard overlap thresholds. With out_dir set, writes one
    prediction CSV per sequence and metrics.json.
    """
    limit_threads()
    model, config, topology = load_trained(checkpoint_path)
    sequences, action_names = load_dataset(data_dir)
    prepared = _prepared_inputs(config, sequences, topology, len(action_names))
    rng = np.random.default_rng(0)  # eval forward draws nothing from it
    predictions = {}
    pairs = []
    for seq_id, x, labels, _ in prepared:
        pred = _predict(model, x, rng, config)
        predictions[seq_id] = pred
        pairs.append((pred, labels))
    report = aggregate_metrics(pairs)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        from .data import write_labels_csv
        for seq_id, pred in predictions.items():
            write_labels_csv(out_dir / f"{seq_id}.csv", pred)
        with open(out_dir / "metrics.json", "w") as f:
            json.dump(report, f, indent=2)
    return report, predictions
