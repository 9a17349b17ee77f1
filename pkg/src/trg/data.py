"""Sequence files, label files, preprocessing, and a synthetic generator.

A dataset is a directory holding actions.json (class id -> name) plus one
pair per sequence: <id>.skel with the raw joint positions and <id>.csv with
per-frame labels. The .skel layout is magic b"TRGS", version uint16, then
C0, T, V as uint32 and a little-endian float32 payload in row-major order.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TRGS_MAGIC = b"TRGS"
TRGS_VERSION = 1


@dataclass
class SkeletonSequence:
    """One recording: features (C0, T, V) and a label per frame."""

    id: str
    x: np.ndarray
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.x.ndim != 3:
            raise ValueError(f"{self.id}: features must be (C0, T, V), got {self.x.shape}")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.x.shape[1]:
            raise ValueError(
                f"{self.id}: {self.labels.shape[0] if self.labels.ndim == 1 else '?'}"
                f" labels for {self.x.shape[1]} frames")
        if not np.issubdtype(self.labels.dtype, np.integer) or self.labels.min() < 0:
            raise ValueError(f"{self.id}: labels must be nonnegative integers")

    @property
    def n_frames(self):
        return self.x.shape[1]

    @property
    def n_joints(self):
        return self.x.shape[2]


def write_skeleton_file(path, x):
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"need (C0, T, V) data, got {x.shape}")
    with open(path, "wb") as f:
        f.write(TRGS_MAGIC)
        f.write(struct.pack("<HIII", TRGS_VERSION, *x.shape))
        f.write(x.astype("<f4").tobytes(order="C"))


def read_skeleton_file(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != TRGS_MAGIC:
        raise ValueError(f"{path}: not a TRGS file (magic {blob[:4]!r})")
    version, c0, t, v = struct.unpack_from("<HIII", blob, 4)
    if version != TRGS_VERSION:
        raise ValueError(f"{path}: unsupported TRGS version {version}")
    count = c0 * t * v
    if len(blob) != 18 + 4 * count:
        raise ValueError(f"{path}: payload size {len(blob) - 18}, header says {4 * count}")
    return np.frombuffer(blob, dtype="<f4", count=count, offset=18) \
        .reshape(c0, t, v).astype(np.float64)


def write_labels_csv(path, labels):
    labels = np.asarray(labels)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame_index", "label"])
        for i, lab in enumerate(labels):
            writer.writerow([i, int(lab)])


def read_labels_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["frame_index", "label"]:
            raise ValueError(f"{path}: expected header frame_index,label, got {header}")
        rows = [(int(a), int(b)) for a, b in reader]
    if not rows:
        raise ValueError(f"{path}: no frames")
    idx = np.array([r[0] for r in rows])
    if not np.array_equal(idx, np.arange(len(rows))):
        raise ValueError(f"{path}: frame_index must run 0..T-1 without gaps")
    return np.array([r[1] for r in rows], dtype=np.int64)


def save_dataset(directory, sequences, action_names):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "actions.json", "w") as f:
        json.dump({str(i): name for i, name in enumerate(action_names)}, f, indent=2)
    for seq in sequences:
        write_skeleton_file(directory / f"{seq.id}.skel", seq.x)
        write_labels_csv(directory / f"{seq.id}.csv", seq.labels)


def load_dataset(directory):
    """Read every sequence pair; returns (sequences, action name list)."""
    directory = Path(directory)
    actions_path = directory / "actions.json"
    if not actions_path.exists():
        raise FileNotFoundError(f"{directory}: no actions.json")
    with open(actions_path) as f:
        mapping = json.load(f)
    ids = sorted(int(k) for k in mapping)
    if ids != list(range(len(ids))):
        raise ValueError(f"{actions_path}: class ids must be contiguous from 0, got {ids}")
    names = [mapping[str(i)] for i in ids]
    sequences = []
    for skel in sorted(directory.glob("*.skel")):
        labels_path = skel.with_suffix(".csv")
        if not labels_path.exists():
            raise FileNotFoundError(f"{skel}: no matching label file {labels_path.name}")
        seq = SkeletonSequence(id=skel.stem,
                               x=read_skeleton_file(skel),
                               labels=read_labels_csv(labels_path))
        if seq.labels.max() >= len(names):
            raise ValueError(f"{seq.id}: label {seq.labels.max()} outside "
                             f"{len(names)} classes in actions.json")
        sequences.append(seq)
    if not sequences:
        raise FileNotFoundError(f"{directory}: no .skel files")
    return sequences, names


def preprocess(raw, root=0):
    """Raw joint positions (A, T, V) to network input (2A, T, V).

    The first A channels hold positions relative to the root joint within
    each frame; the last A channels hold frame-to-frame displacements of the
    raw positions (zero at the first frame). 3-axis input gives the usual
    6-channel layout; two stacked bodies give 12.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3:
        raise ValueError(f"need (axes, T, V) positions, got {raw.shape}")
    if not np.isfinite(raw).all():
        raise ValueError("non-finite value in raw positions")
    a, t, v = raw.shape
    if not 0 <= root < v:
        raise ValueError(f"root joint {root} outside {v} joints")
    rel = raw - raw[:, :, root:root + 1]
    disp = np.zeros_like(raw)
    disp[:, 1:] = raw[:, 1:] - raw[:, :-1]
    return np.concatenate([rel, disp], axis=0)


def _segment_bounds(rng, t, n_segments, min_len):
    for _ in range(1000):
        cuts = np.sort(rng.choice(np.arange(1, t), size=n_segments - 1, replace=False))
        bounds = np.concatenate([[0], cuts, [t]])
        if np.diff(bounds).min() >= min_len:
            return bounds
    raise ValueError(f"cannot fit {n_segments} segments of >= {min_len} frames in {t}")


def synth_generate(n_sequences, n_classes, n_joints, seed,
                   t_range=(150, 250), axes=3, noise=0.03, min_segment=10):
    """Deterministic synthetic dataset of labeled joint-motion sequences.

    Joints rest on a circle; each class moves them along a class-specific
    direction with a class-specific sinusoid (amplitude and frequency grow
    with the class id, phases vary per joint), so classes separate by motion
    energy alone. Gaussian noise is added on top. Everything is drawn from
    one generator seeded by `seed`, so the same seed reproduces the dataset
    bit for bit.
    """
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if n_joints < 4:
        raise ValueError(f"need at least 4 joints, got {n_joints}")
    rng = np.random.default_rng(seed)

    freq = 0.35 + 0.4 * np.arange(n_classes) + rng.uniform(0, 0.05, n_classes)
    amp = 0.35 + 0.3 * np.arange(n_classes) + rng.uniform(0, 0.05, n_classes)
    phase = rng.uniform(0, 2 * np.pi, size=(n_classes, n_joints))
    direction = rng.normal(size=(n_classes, axes))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)

    angles = np.linspace(0, 2 * np.pi, n_joints, endpoint=False)
    rest = np.stack([np.cos(angles), np.sin(angles),
                     rng.uniform(-0.2, 0.2, n_joints)])[:axes]

    sequences = []
    for i in range(n_sequences):
        t = int(rng.integers(t_range[0], t_range[1] + 1))
        n_seg = int(rng.integers(3, 9))
        bounds = _segment_bounds(rng, t, n_seg, min_segment)
        labels = np.empty(t, dtype=np.int64)
        x = np.empty((axes, t, n_joints))
        prev_cls = -1
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            cls = int(rng.integers(0, n_classes))
            while cls == prev_cls:
                cls = int(rng.integers(0, n_classes))
            prev_cls = cls
            labels[lo:hi] = cls
            clock = np.arange(lo, hi, dtype=np.float64)[:, None]
            wave = amp[cls] * np.sin(2 * np.pi * freq[cls] * clock / 24.0
                                     + phase[cls][None, :])
            x[:, lo:hi] = rest[:, None, :] \
                + direction[cls][:, None, None] * wave[None, :, :]
        x += noise * rng.normal(size=x.shape)
        sequences.append(SkeletonSequence(id=f"seq{i:03d}", x=x, labels=labels))
    names = [f"motion{k}" for k in range(n_classes)]
    return sequences, names
