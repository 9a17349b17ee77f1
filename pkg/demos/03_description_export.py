"""Round trip between the exporter and the segmentation package.

Encodes the synthetic action descriptions with the exporter's built-in
deterministic encoder, writes a TRGE file, reads it back with the
segmentation package's loader, and shows that the similarity structure
survives the trip. Needs the exporter package installed
(pip install -e exporter/).
"""

import tempfile
from pathlib import Path

import numpy as np

try:
    from trg_embed import encode_descriptions, load_descriptions, write_trge
except ImportError as exc:
    raise SystemExit(f"exporter package not installed: {exc}")

from trg.textgraph import load_embedding_file


def cosine_table(emb):
    unit = emb.matrix / np.linalg.norm(emb.matrix, axis=1, keepdims=True)
    return unit @ unit.T


def main():
    described = load_descriptions("fixtures/descriptions/synth_actions.json")
    emb = encode_descriptions(described)
    print(f"encoded {len(described)} descriptions into {emb.matrix.shape} rows")

    out = Path(tempfile.mkdtemp(prefix="trg_export_")) / "synth_actions.trge"
    write_trge(emb, out)
    print(f"wrote {out} ({out.stat().st_size} bytes) plus labels sidecar")

    loaded = load_embedding_file(out)
    stored = emb.matrix.astype("<f4").astype(np.float64)
    print("reload matches stored float32 values:",
          np.array_equal(loaded.matrix, stored))

    before = cosine_table(emb)
    after = cosine_table(loaded)
    print(f"cosine drift from float32 storage: {np.abs(before - after).max():.2e}")

    print("\ncosines between the loaded action embeddings:")
    for i, a in enumerate(loaded.labels):
        for j in range(i + 1, len(loaded.labels)):
            print(f"  {a} vs {loaded.labels[j]}: {after[i, j]:.3f}")

    print("\nTraining consumes frozen TRGE files exactly like this one "
          "(see fixtures/embeddings), so no text encoder has to be "
          "available at train time.")


if __name__ == "__main__":
    main()
