"""Command line entry points.

    extract embeddings --model ID --in corpus.txt --out DIR [--format text|conll|ptb]
    extract spans      --model ID --in trees.mrg  --out DIR
    extract morph      --in vocab.txt --vectors src.vec --out DIR [--order 3]

``embeddings`` writes ``<prefix>.semb`` plus a token manifest;
``spans`` additionally writes ``<prefix>.spans.json`` with one record per
constituent. ``morph`` writes ``<prefix>.vec``. All outputs land in the
format the clustering toolkit ingests directly.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus, embeddings, formats, morph

logger = logging.getLogger(__name__)


def _token_items(sentences, kept):
    items = []
    labels = set()
    for new_sent, old_idx in enumerate(kept):
        sentence = sentences[old_idx]
        tags = sentence.pos_tags or ["_"] * len(sentence.tokens)
        for tok_idx, (word, tag) in enumerate(zip(sentence.tokens, tags)):
            items.append({"sent": new_sent, "tok": tok_idx, "surface": word, "gold": tag})
            labels.add(tag)
    return items, sorted(labels)


def _span_items(sentences, kept):
    items = []
    labels = set()
    for new_sent, old_idx in enumerate(kept):
        for start, end, label in sentences[old_idx].spans or []:
            items.append({"sent": new_sent, "start": start, "end": end, "gold": label})
            labels.add(label)
    return items, sorted(labels)


def _extract_corpus(args, reader):
    sentences = reader(args.infile)
    tokenizer, model = embeddings.load_model(args.model)
    result = embeddings.extract_word_vectors(
        tokenizer,
        model,
        [s.tokens for s in sentences],
        max_len=args.max_len,
        batch_size=args.batch_size,
        include_embedding_layer=args.include_embedding_layer,
    )
    vectors = embeddings.select_layers(result.vectors, args.layers)
    return sentences, result, vectors


def cmd_embeddings(args) -> int:
    reader = corpus.READERS[args.format]
    sentences, result, vectors = _extract_corpus(args, reader)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix or Path(args.infile).stem
    formats.write_semb(out_dir / f"{prefix}.semb", vectors)
    items, labels = _token_items(sentences, result.kept)
    formats.write_posi_manifest(out_dir / f"{prefix}.manifest.json", items, labels)
    print(
        json.dumps(
            {
                "semb": f"{prefix}.semb",
                "manifest": f"{prefix}.manifest.json",
                "n_items": int(vectors.shape[0]),
                "n_layers": int(vectors.shape[1]),
                "dim": int(vectors.shape[2]),
                "skipped_sentences": result.skipped,
            }
        )
    )
    return 0


def cmd_spans(args) -> int:
    args.format = "ptb"
    sentences, result, vectors = _extract_corpus(args, corpus.read_ptb)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix or Path(args.infile).stem
    formats.write_semb(out_dir / f"{prefix}.semb", vectors)
    token_items, token_labels = _token_items(sentences, result.kept)
    formats.write_posi_manifest(out_dir / f"{prefix}.manifest.json", token_items, token_labels)
    span_items, span_labels = _span_items(sentences, result.kept)
    formats.write_colab_manifest(out_dir / f"{prefix}.spans.json", span_items, span_labels)
    print(
        json.dumps(
            {
                "semb": f"{prefix}.semb",
                "manifest": f"{prefix}.manifest.json",
                "spans": f"{prefix}.spans.json",
                "n_items": int(vectors.shape[0]),
                "n_spans": len(span_items),
                "skipped_sentences": result.skipped,
            }
        )
    )
    return 0


def cmd_morph(args) -> int:
    if args.manifest:
        doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        vocab = sorted({item["surface"] for item in doc["items"]})
    elif args.infile:
        vocab = morph.read_vocab(args.infile)
    else:
        raise SystemExit("morph needs --in or --manifest")
    if not (args.vectors or args.model):
        raise morph.ModelMissing("morph needs --vectors or --model")
    source = morph.open_source(args.vectors if args.vectors else args.model)
    entries = morph.extract_morph(vocab, args.order, source)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix or "morph"
    formats.write_vec(out_dir / f"{prefix}.vec", entries)
    print(json.dumps({"vec": f"{prefix}.vec", "n_entries": len(entries)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extract", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="model directory or hub id")
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--layers", default="all")
        p.add_argument("--max-len", type=int, default=512)
        p.add_argument("--batch-size", type=int, default=16)
        p.add_argument("--include-embedding-layer", action="store_true")
        p.add_argument("--prefix", default=None)

    p = sub.add_parser("embeddings", help="word-level embeddings for a token corpus")
    common(p)
    p.add_argument("--format", choices=sorted(corpus.READERS), default="text")
    p.set_defaults(func=cmd_embeddings)

    p = sub.add_parser("spans", help="embeddings plus constituent spans from trees")
    common(p)
    p.set_defaults(func=cmd_spans)

    p = sub.add_parser("morph", help="character n-gram vectors for a vocabulary")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--model", default=None, help="fasttext .bin model")
    p.add_argument("--vectors", default=None, help="lookup .vec file")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--prefix", default=None)
    p.set_defaults(func=cmd_morph)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (corpus.CorpusError, morph.ModelMissing, embeddings.AlignmentFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: missing file {exc.filename}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
