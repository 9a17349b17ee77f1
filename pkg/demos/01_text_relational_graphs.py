"""From description embeddings to relational graphs.

Loads the shipped PKU-MMD joint and action embedding files, builds the
two relational graphs the segmentation model consumes, and walks through
what the entries mean. The headline property: joints that mirror each
other across the body (left hand, right hand) sit closer in description
space than joints or actions that merely share prose style.
"""

import numpy as np

from trg.textgraph import build_relational_graph, load_embedding_file

JOINTS = "fixtures/embeddings/pku_joints.trge"
ACTIONS = "fixtures/embeddings/pku_actions.trge"


def nearest(graph, label, k=3):
    i = graph.index_of(label)
    order = np.argsort(graph.matrix[i])[::-1]
    return [(graph.labels[j], graph.matrix[i, j]) for j in order if j != i][:k]


def main():
    joints = load_embedding_file(JOINTS)
    actions = load_embedding_file(ACTIONS)
    print(f"joint embeddings:  {joints.matrix.shape[0]} x {joints.matrix.shape[1]}")
    print(f"action embeddings: {actions.matrix.shape[0]} x {actions.matrix.shape[1]}")

    tjg = build_relational_graph(joints)
    tag = build_relational_graph(actions)
    print("\njoint graph is symmetric with unit diagonal:",
          np.allclose(tjg.matrix, tjg.matrix.T),
          np.allclose(np.diag(tjg.matrix), 1.0))

    print("\nclosest joints to a few body parts:")
    for label in ("left hand", "head", "right knee"):
        pairs = ", ".join(f"{other} ({w:.2f})" for other, w in nearest(tjg, label))
        print(f"  {label:<12} -> {pairs}")

    lh, rh = tjg.index_of("left hand"), tjg.index_of("right hand")
    rf = tjg.index_of("right foot")
    print(f"\nleft hand vs right hand weight: {tjg.matrix[lh, rh]:.3f}")
    print(f"left hand vs right foot weight: {tjg.matrix[lh, rf]:.3f}")
    print("mirrored joints win:", tjg.matrix[lh, rh] > tjg.matrix[lh, rf])

    print("\nclosest actions to a few classes:")
    for label in ("jump up", "drink water", "hand waving"):
        pairs = ", ".join(f"{other} ({w:.2f})" for other, w in nearest(tag, label))
        print(f"  {label:<12} -> {pairs}")

    print("\nThese two matrices enter training as fixed supervision "
          "targets: the action graph anchors relative distances between "
          "pooled segment features, and the raw action embeddings anchor "
          "their absolute directions.")


if __name__ == "__main__":
    main()
