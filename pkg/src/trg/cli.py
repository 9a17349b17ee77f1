"""Command-line entry points.

    trg graph build --embeddings F --out G     relational graph from embeddings
    trg synth --config C --out DIR             generate a synthetic dataset
    trg train --config C                       fit a model
    trg eval --checkpoint W --data DIR         score a checkpoint
    trg augment --in DIR --out DIR ...         occlude/rotate a dataset on disk
    trg config dump                            print the default configuration
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .augment import AugmentConfig, apply_saep
from .config import RunConfig, load_config
from .data import SkeletonSequence, load_dataset, save_dataset, synth_generate
from .textgraph import build_relational_graph, load_embedding_file


def _cmd_graph_build(args):
    emb = load_embedding_file(args.embeddings)
    graph = build_relational_graph(emb, metric=args.metric,
                                   normalization=args.normalization)
    np.save(args.out, graph.matrix)
    print(f"wrote {graph.matrix.shape[0]}x{graph.matrix.shape[1]} graph "
          f"over {len(graph.labels)} labels to {args.out}")


def _cmd_synth(args):
    config = load_config(args.config) if args.config else RunConfig()
    sequences, names = synth_generate(
        n_sequences=config.synth_sequences,
        n_classes=config.synth_classes,
        n_joints=config.synth_joints,
        seed=config.seed,
        t_range=(config.synth_t_min, config.synth_t_max))
    save_dataset(args.out, sequences, names)
    print(f"wrote {len(sequences)} sequences, {len(names)} classes to {args.out}")


def _cmd_train(args):
    from .train import train
    config = load_config(args.config)
    result = train(config, log_stream=sys.stderr)
    print(json.dumps({"checkpoint": result["checkpoint"],
                      "log": result["log"],
                      "epochs_run": result["epochs_run"],
                      "final_loss": result["epoch_losses"][-1]
                      if result["epoch_losses"] else None,
                      "seconds": round(result["seconds"], 1)}, indent=2))


def _cmd_eval(args):
    from .train import evaluate
    report, _ = evaluate(args.checkpoint, args.data, out_dir=args.out)
    print(json.dumps(report, indent=2))


def _cmd_augment(args):
    sequences, names = load_dataset(getattr(args, "in"))
    rng = np.random.default_rng(args.seed)
    config = AugmentConfig(alpha=args.alpha, beta=args.beta)
    transformed = apply_saep([s.x for s in sequences], config, rng, train=True)
    out = [SkeletonSequence(id=s.id, x=x, labels=s.labels)
           for s, x in zip(sequences, transformed)]
    save_dataset(args.out, out, names)
    print(f"wrote {len(out)} augmented sequences to {args.out}")


def _cmd_config(args):
    if args.action == "dump":
        print(RunConfig().to_json())
    else:
        raise SystemExit(f"unknown config action {args.action!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="trg",
                                     description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", help="text-embedding graph tools")
    graph_sub = graph.add_subparsers(dest="action", required=True)
    build = graph_sub.add_parser("build", help="relational graph from a TRGE file")
    build.add_argument("--embeddings", required=True)
    build.add_argument("--out", required=True, help="output .npy path")
    build.add_argument("--metric", default="l2", choices=("l2", "l1", "cosine"))
    build.add_argument("--normalization", default="minmax",
                       choices=("minmax", "zscore", "sigmoid"))
    build.set_defaults(fn=_cmd_graph_build)

    synth = sub.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--config", default=None)
    synth.add_argument("--out", required=True)
    synth.set_defaults(fn=_cmd_synth)

    tr = sub.add_parser("train", help="train from a config file")
    tr.add_argument("--config", required=True)
    tr.set_defaults(fn=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out", default=None, help="directory for prediction CSVs")
    ev.set_defaults(fn=_cmd_eval)

    aug = sub.add_parser("augment", help="write an occluded/rotated copy of a dataset")
    aug.add_argument("--in", required=True)
    aug.add_argument("--out", required=True)
    aug.add_argument("--alpha", type=float, default=1.0 / 3.0)
    aug.add_argument("--beta", type=float, default=1.0 / 3.0)
    aug.add_argument("--seed", type=int, default=0)
    aug.set_defaults(fn=_cmd_augment)

    cfg = sub.add_parser("config", help="configuration tools")
    cfg.add_argument("action", choices=("dump",))
    cfg.set_defaults(fn=_cmd_config)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.fn(args)


if __name__ == "__main__":
    main()
