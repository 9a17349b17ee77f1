"""Training-time sequence augmentation: joint occlusion and axial rotation.

Each epoch the training sequences are partitioned: a fraction alpha gets a
random subset of joints zeroed (the same joints in every frame), a disjoint
fraction beta gets all 3-channel coordinate groups rotated by one random
angle about the vertical axis, the rest pass through. Evaluation never
augments. No sequence receives both transforms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    alpha: float = 1.0 / 3.0  # fraction of sequences occluded
    beta: float = 1.0 / 3.0   # fraction rotated
    axis: int = 1             # vertical coordinate within each 3-channel group

    def __post_init__(self):
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("fractions must lie in [0,1]")
        if self.alpha + self.beta > 1 + 1e-12:
            raise ValueError(f"alpha+beta = {self.alpha + self.beta:.3f} exceeds 1")
        if self.axis not in (0, 1, 2):
            raise ValueError("rotation axis must index one of 3 coordinates")


def random_occlusion(x, rng):
    """Zero a uniformly-drawn number (0..V/2) of joints in every frame."""
    x = np.asarray(x)
    v = x.shape[2]
    count = int(rng.integers(0, v // 2 + 1))
    out = x.copy()
    if count:
        joints = rng.choice(v, size=count, replace=False)
        out[:, :, joints] = 0.0
    return out


def rotation_matrix(theta, axis=1):
    """3x3 rotation about one coordinate axis."""
    c, s = np.cos(theta), np.sin(theta)
    r = np.eye(3)
    other = [i for i in range(3) if i != axis]
    r[other[0], other[0]] = c
    r[other[0], other[1]] = -s
    r[other[1], other[0]] = s
    r[other[1], other[1]] = c
    return r


def random_axial_rotation(x, rng, axis=1):
    """Rotate every consecutive 3-channel group by one shared random angle.

    Inputs whose channel count is not a multiple of 3 (2-axis data) cannot
    be rotated; they pass through with a warning.
    """
    x = np.asarray(x)
    c0 = x.shape[0]
    if c0 % 3:
        warnings.warn(f"rotation skipped: {c0} channels not divisible by 3")
        return x.copy()
    theta = rng.uniform(0.0, 2.0 * np.pi)
    return rotate_by(x, theta, axis=axis)


def rotate_by(x, theta, axis=1):
    x = np.asarray(x)
    c0, t, v = x.shape
    if c0 % 3:
        raise ValueError(f"{c0} channels do not form 3-channel groups")
    r = rotation_matrix(theta, axis=axis)
    grouped = x.reshape(c0 // 3, 3, t, v)
    return np.einsum("ab,gbtv->gatv", r, grouped).reshape(c0, t, v)


def apply_saep(sequences, config, rng, train):
    """Partition and transform a list of (C0,T,V) arrays; identity in eval."""
    if not train:
        return [np.asarray(x) for x in sequences]
    n = len(sequences)
    order = rng.permutation(n)
    n_occ = int(np.floor(config.alpha * n))
    n_rot = int(np.floor(config.beta * n))
    occluded = set(order[:n_occ].tolist())
    rotated = set(order[n_occ:n_occ + n_rot].tolist())
    out = []
    for i, x in enumerate(sequences):
        if i in occluded:
            out.append(random_occlusion(x, rng))
        elif i in rotated:
            out.append(random_axial_rotation(x, rng, axis=config.axis))
        else:
            out.append(np.asarray(x).copy())
    return out
