"""Character n-gram vectors for the morphology side channel.

For every distinct final n-gram over a vocabulary, look up (or compute) a
vector and emit a ``.vec`` table. Two sources are supported: a pretrained
subword-model binary via the optional ``fasttext`` package, which can
produce a vector for any string, and a plain ``.vec`` text file used as a
lookup table, where n-grams missing from the table are dropped with a
logged count (the downstream toolkit zero-fills unknown n-grams anyway).
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class ModelMissing(RuntimeError):
    pass


def last_ngram(surface: str, order: int) -> str:
    if not surface:
        raise ValueError("empty surface form")
    if order < 1:
        raise ValueError("order must be >= 1")
    return surface[-order:]


class VecLookup:
    """Vector source backed by a word2vec-style text file."""

    def __init__(self, path):
        path = Path(path)
        if not path.exists():
            raise ModelMissing(f"vector file not found: {path}")
        self.entries: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}: header must be '<count> <dim>'")
            self.dim = int(header[1])
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                self.entries[parts[0]] = np.array(parts[1:], dtype=np.float32)

    def get(self, ngram: str):
        return self.entries.get(ngram)


class FasttextModel:
    """Vector source backed by a pretrained fastText binary."""

    def __init__(self, path):
        path = Path(path)
        if not path.exists():
            raise ModelMissing(f"fasttext model not found: {path}")
        try:
            import fasttext
        except ImportError as exc:
            raise ModelMissing("the fasttext package is not installed") from exc
        self.model = fasttext.load_model(str(path))
        self.dim = self.model.get_dimension()

    def get(self, ngram: str):
        return np.asarray(self.model.get_word_vector(ngram), dtype=np.float32)


def open_source(path):
    path = Path(path)
    if path.suffix == ".bin":
        return FasttextModel(path)
    return VecLookup(path)


def read_vocab(path) -> list[str]:
    """One token per line; blank lines ignored."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        token = line.strip()
        if token:
            out.append(token)
    return out


def extract_morph(vocab: list[str], order: int, source) -> dict[str, np.ndarray]:
    """Vector per distinct final n-gram of the vocabulary."""
    ngrams = sorted({last_ngram(tok, order) for tok in vocab})
    entries: dict[str, np.ndarray] = {}
    missing = 0
    for gram in ngrams:
        vec = source.get(gram)
        if vec is None:
            missing += 1
            continue
        entries[gram] = vec
    if missing:
        logger.warning("%d of %d n-grams missing from the vector source", missing, len(ngrams))
    return entries
