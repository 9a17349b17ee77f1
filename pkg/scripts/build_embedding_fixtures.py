"""Freeze deterministic embedding fixtures from the description files.

Each token maps to a fixed pseudorandom direction seeded by its SHA-256
digest; a description embeds as the mean of its token vectors with the label
tokens triple-weighted. Descriptions that share vocabulary therefore land
close in cosine similarity, which is the only property the fixture files
need to carry. The per-file mean is subtracted before writing (the usual
common-component removal for bag-of-token embeddings) so that cosines spread
around zero instead of crowding the positive octant; without it every pair
of descriptions looks spuriously similar just for being prose. Rerunning
the script reproduces the same bytes.
"""

import hashlib
import json
import re
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from trg.textgraph import LabeledEmbeddings, write_embedding_file

DIM = 768
LABEL_WEIGHT = 3


def tokenize(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def token_vector(token):
    seed = int.from_bytes(hashlib.sha256(token.encode()).digest()[:8], "little")
    return np.random.default_rng(seed).normal(size=DIM) / np.sqrt(DIM)


def encode(label, description):
    tokens = tokenize(label) * LABEL_WEIGHT + tokenize(description)
    return np.mean([token_vector(t) for t in tokens], axis=0)


def build(desc_path, out_path):
    entries = json.loads(Path(desc_path).read_text())
    labels = [e["label"] for e in entries]
    matrix = np.stack([encode(e["label"], e["description"]) for e in entries])
    matrix -= matrix.mean(axis=0)
    emb = LabeledEmbeddings(labels=tuple(labels), matrix=matrix)
    write_embedding_file(emb, out_path, source="token-hash fixture", pooling="mean")
    print(f"{out_path}: {matrix.shape[0]} x {matrix.shape[1]}")


def main():
    root = Path(__file__).resolve().parents[1] / "fixtures"
    pairs = [
        ("pku_joints.json", "pku_joints.trge"),
        ("pku_actions.json", "pku_actions.trge"),
        ("lara_joints.json", "lara_joints.trge"),
        ("lara_actions.json", "lara_actions.trge"),
        ("synth_joints.json", "synth_joints.trge"),
        ("synth_actions.json", "synth_actions.trge"),
    ]
    for desc, out in pairs:
        build(root / "descriptions" / desc, root / "embeddings" / out)


if __name__ == "__main__":
    main()
