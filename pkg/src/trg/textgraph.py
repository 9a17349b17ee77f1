"""Relational graphs over joints or actions, derived from text embeddings.

Each joint (or action class) has a natural-language description whose pooled
encoder embedding is shipped in a TRGE file. Pairwise distances between the
embedding rows, passed through an inverse min-max map, give a fixed
similarity graph: close descriptions mean similar roles, so the graph entry
approaches 1. The graphs are computed once and never trained.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRGE_MAGIC = b"TRGE"
TRGE_VERSION = 1

DISTANCE_METRICS = ("l2", "l1", "cosine")
NORMALIZATIONS = ("minmax", "zscore", "sigmoid")


@dataclass(frozen=True)
class LabeledEmbeddings:
    """n description embeddings (rows) with their label strings."""

    labels: tuple
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got {self.matrix.shape}")
        if len(self.labels) != self.matrix.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels but {self.matrix.shape[0]} embedding rows")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in embedding set")
        if not np.isfinite(self.matrix).all():
            raise ValueError("non-finite embedding values")


@dataclass(frozen=True)
class RelationalGraph:
    """Symmetric similarity matrix in [0,1] over the labeled entities."""

    labels: tuple
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"graph must be square, got {m.shape}")
        if np.abs(m - m.T).max() > 1e-9:
            raise ValueError("graph is not symmetric")
        if m.min() < -1e-12 or m.max() > 1 + 1e-12:
            raise ValueError("graph entries outside [0,1]")

    def index_of(self, label):
        return self.labels.index(label)


def pairwise_l2(E):
    """D[i][j] = ||row_i - row_j||_2; symmetric with zero diagonal."""
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] < 2:
        raise ValueError(f"need at least 2 embedding rows, got shape {E.shape}")
    diff = E[:, None, :] - E[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def pairwise_l1(E):
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] < 2:
        raise ValueError(f"need at least 2 embedding rows, got shape {E.shape}")
    return np.abs(E[:, None, :] - E[None, :, :]).sum(axis=-1)


def pairwise_cosine(E):
    """1 - cosine similarity, symmetrized and zeroed on the diagonal."""
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] < 2:
        raise ValueError(f"need at least 2 embedding rows, got shape {E.shape}")
    norms = np.linalg.norm(E, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ValueError("zero row has no cosine distance")
    En = E / norms
    raw = 1.0 - En @ En.T
    upper = np.triu(raw, 1)
    return upper + upper.T


def inverse_minmax(D):
    """G = 1 - (D - min)/(max - min); all-ones when D is constant."""
    D = np.asarray(D, dtype=np.float64)
    if not np.isfinite(D).all():
        raise ValueError("non-finite distance matrix")
    lo, hi = D.min(), D.max()
    if hi == lo:
        return np.ones_like(D)
    return 1.0 - (D - lo) / (hi - lo)


def _normalize_zscore(D):
    # scale-standardized exponential decay: keeps zero self-distance at 1
    s = D.std()
    if s == 0:
        return np.ones_like(D)
    return np.exp(-D / s)


def _normalize_sigmoid(D):
    return 2.0 / (1.0 + np.exp(D))


_PAIRWISE = {"l2": pairwise_l2, "l1": pairwise_l1, "cosine": pairwise_cosine}
_NORMALIZE = {"minmax": inverse_minmax, "zscore": _normalize_zscore,
              "sigmoid": _normalize_sigmoid}


def build_relational_graph(emb, metric="l2", normalization="minmax"):
    """Distance matrix composed with an inverse normalization, labels kept.

    The defaults (L2 + min-max) guarantee a unit diagonal; the alternative
    normalizations keep symmetry and [0,1] range but are ablation-only.
    """
    if metric not in _PAIRWISE:
        raise ValueError(f"unknown distance metric {metric!r}")
    if normalization not in _NORMALIZE:
        raise ValueError(f"unknown normalization {normalization!r}")
    D = _PAIRWISE[metric](emb.matrix)
    G = _NORMALIZE[normalization](D)
    return RelationalGraph(labels=tuple(emb.labels), matrix=G)


# ---------------------------------------------------------------------------
# TRGE embedding files

def _sidecar_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".labels.json")


HEADER_SIZE = 16  # magic(4) + version u16 + reserved u16 + rows u32 + cols u32


def write_embedding_file(emb, path, source="unknown", pooling="mean"):
    """TRGE binary plus labels sidecar (the format the exporter emits)."""
    matrix = np.asarray(emb.matrix)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError(f"refusing to write empty embedding matrix {matrix.shape}")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(TRGE_MAGIC)
        f.write(struct.pack("<HH", TRGE_VERSION, 0))
        f.write(struct.pack("<II", matrix.shape[0], matrix.shape[1]))
        f.write(matrix.astype("<f4").tobytes(order="C"))
    sidecar = {"labels": list(emb.labels), "source": source, "pooling": pooling}
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=1))


def load_embedding_file(path):
    """Read a TRGE file and its sidecar into validated LabeledEmbeddings."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER_SIZE:
        raise ValueError(f"{path}: truncated TRGE header")
    if blob[:4] != TRGE_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != TRGE_VERSION:
        raise ValueError(f"{path}: unsupported TRGE version {version}")
    rows, cols = struct.unpack_from("<II", blob, 8)
    expected = HEADER_SIZE + 4 * rows * cols
    if len(blob) != expected:
        raise ValueError(f"{path}: payload is {len(blob) - HEADER_SIZE} bytes, "
                         f"expected {expected - HEADER_SIZE} for {rows}x{cols}")
    matrix = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=HEADER_SIZE)
    matrix = matrix.reshape(rows, cols).astype(np.float64)

    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FileNotFoundError(f"missing labels sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    labels = meta.get("labels")
    if not isinstance(labels, list):
        raise ValueError(f"{sidecar}: no labels list")
    if len(labels) != rows:
        raise ValueError(f"{sidecar}: {len(labels)} labels for {rows} embedding rows")
    if (np.abs(matrix).sum(axis=1) == 0).any():
        raise ValueError(f"{path}: all-zero embedding row (failed export?)")
    return LabeledEmbeddings(labels=tuple(labels), matrix=matrix)
