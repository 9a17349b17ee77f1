"""Command line entry point for the embedding exporter."""

import argparse

from .descriptions import load_descriptions
from .export import encode_descriptions, write_trge


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="trg-embed",
        description="Encode joint or action descriptions and write a TRGE file.")
    parser.add_argument(
        "--descriptions", required=True,
        help="JSON list of {label, description} entries")
    parser.add_argument(
        "--out", required=True, help="output .trge path")
    parser.add_argument(
        "--encoder", default="builtin",
        help="transformers checkpoint id or path; the default needs no checkpoint")
    args = parser.parse_args(argv)

    described = load_descriptions(args.descriptions)
    emb = encode_descriptions(described, encoder=args.encoder)
    out = write_trge(emb, args.out, source=args.encoder)
    print(f"{out}: {emb.matrix.shape[0]} x {emb.matrix.shape[1]} rows from {args.encoder}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
