"""Run configuration: one flat record covering data, model, and training.

Defaults follow the published training setup for the full-scale model
(channel sizes 64/16/8/16, projection width 768, 10 temporal layers, one
class refinement and two boundary refinements, smoothing threshold 4,
supervision weights 1, a third of sequences occluded and a third rotated,
learning rate 0.001, batch size 8, dropout 0.5). `trg config dump` prints
them for audit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields


@dataclass
class RunConfig:
    # data
    data_dir: str = "data/train"
    eval_dir: str = ""
    topology: str = "fixtures/topologies/synth_8.json"
    joint_embeddings: str = "fixtures/embeddings/synth_joints.trge"
    action_embeddings: str = "fixtures/embeddings/synth_actions.trge"
    out_dir: str = "runs/default"
    root_joint: int = 0

    # model
    c0: int = 6
    c: int = 64
    c1: int = 16
    c2: int = 8
    c3: int = 16
    c_t: int = 768
    heads: int = 4
    temporal_layers: int = 10
    k_max: int = 0            # 0 means the topology's graph diameter
    class_stages: int = 1
    boundary_stages: int = 2
    refine_layers: int = 10
    dropout: float = 0.5

    # losses
    tau: float = 4.0
    sigma: float = 1.0
    lambda_abs: float = 1.0
    lambda_rel: float = 1.0

    # augmentation
    augment: bool = True
    alpha: float = 1.0 / 3.0
    beta: float = 1.0 / 3.0
    rotation_axis: int = 1

    # optimization
    learning_rate: float = 0.001
    batch_size: int = 8
    epochs: int = 50
    seed: int = 0
    target_acc: float = 0.0   # early stop once eval-mode train accuracy reaches this

    # boundary handling
    boundary_threshold: float = 0.5
    boundary_radius: int = 2

    # synthetic data generation (`trg synth`)
    synth_sequences: int = 20
    synth_classes: int = 3
    synth_joints: int = 8
    synth_t_min: int = 150
    synth_t_max: int = 250

    def __post_init__(self):
        if not 0 < self.boundary_threshold < 1:
            raise ValueError(f"boundary_threshold must lie in (0,1), "
                             f"got {self.boundary_threshold}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.c % self.c1:
            raise ValueError(f"c1={self.c1} must divide c={self.c}")

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def load_config(path):
    with open(path) as f:
        raw = json.load(f)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    return RunConfig(**raw)


def save_config(path, config):
    with open(path, "w") as f:
        f.write(config.to_json() + "\n")
