"""Command-line front end: hs-export --model ... --texts ... --out ..."""

import argparse
import sys
from pathlib import Path

from .export import export_corpus


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="hs-export",
        description="Export tokenizations, hidden states, embeddings, and "
        "transformed mask states from a pretrained masked LM.",
    )
    ap.add_argument("--model", required=True, help="checkpoint path or hub name")
    ap.add_argument("--texts", required=True, help="UTF-8 text file, one text per line")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--no-embeddings", action="store_true")
    ap.add_argument("--no-mask-states", action="store_true")
    ap.add_argument("--no-vocab", action="store_true")
    args = ap.parse_args(argv)

    texts = [line for line in Path(args.texts).read_text(encoding="utf-8").splitlines() if line.strip()]
    manifest = export_corpus(
        args.model,
        texts,
        args.out,
        include_embeddings=not args.no_embeddings,
        include_mask_states=not args.no_mask_states,
        include_vocab=not args.no_vocab,
    )
    print(
        f"exported {len(manifest.entries)} texts "
        f"(skipped {len(manifest.skipped)}) to {args.out}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
