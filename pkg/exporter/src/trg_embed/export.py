"""Pooled description embeddings and the TRGE file writer.

TRGE layout: ASCII magic "TRGE", version u16, reserved u16, row count
u32, column count u32 (all little-endian), then the matrix as row-major
little-endian float32. Labels travel in a JSON sidecar next to the
binary, named <stem>.labels.json. This matches what the segmentation
package loads, which is the only contract between the two.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptions import DescriptionSet
from .encoder import load_encoder

TRGE_MAGIC = b"TRGE"
TRGE_VERSION = 1
HEADER_SIZE = 16


@dataclass(frozen=True)
class LabeledEmbeddings:
    """n embedding rows with their label strings."""

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


def encode_descriptions(descriptions, encoder="builtin"):
    """Encode a DescriptionSet into one pooled row per description.

    The encoder argument is either a spec string understood by
    load_encoder or an object with an encode(texts) method.
    """
    if isinstance(descriptions, DescriptionSet):
        labels, texts = descriptions.labels, descriptions.texts
    else:
        labels, texts = zip(*descriptions)
    backend = load_encoder(encoder) if encoder is None or isinstance(encoder, str) else encoder
    matrix = np.asarray(backend.encode(list(texts)), dtype=np.float64)
    return LabeledEmbeddings(labels=tuple(labels), matrix=matrix)


def _sidecar_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".labels.json")


def write_trge(emb, path, source="builtin", pooling="mean"):
    """Write embeddings as a TRGE binary plus its labels sidecar."""
    matrix = np.asarray(emb.matrix)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError(f"refusing to write empty embedding matrix {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise ValueError("non-finite embedding values")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(TRGE_MAGIC)
        f.write(struct.pack("<HH", TRGE_VERSION, 0))
        f.write(struct.pack("<II", matrix.shape[0], matrix.shape[1]))
        f.write(matrix.astype("<f4").tobytes(order="C"))
    sidecar = {"labels": list(emb.labels), "source": source, "pooling": pooling}
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=1))
    return path
