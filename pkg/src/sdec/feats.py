"""Task-specific representation composition.

For token clustering: augment each token's contextual embedding with the
pretrained vector of its final character n-gram (suffixes carry most of
the morphological signal). For span labelling: compose a span vector from
the token embeddings of its sentence, either by concatenating the two
endpoint embeddings or by element-wise mean/max pooling, and filter out
single-word spans and excluded labels before evaluation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataio import Dataset, DatasetManifest, MorphTable, TASK_COLAB, TASK_POSI
from .errors import ArgumentError, UnsupportedTaskError

logger = logging.getLogger(__name__)

SPAN_MODES = ("endpoints_concat", "mean", "max")
DEFAULT_EXCLUDED_LABELS = frozenset({"TOP"})


@dataclass(frozen=True)
class NgramSpec:
    order: int
    table: MorphTable

    def __post_init__(self):
        if self.order < 1:
            raise ArgumentError("n-gram order must be >= 1")


@dataclass(frozen=True)
class FeatureSpec:
    morph: NgramSpec | None = None
    span_mode: str = "endpoints_concat"

    def __post_init__(self):
        if self.span_mode not in SPAN_MODES:
            raise ArgumentError(f"unknown span mode {self.span_mode!r}")


def last_ngram(surface: str, order: int) -> str:
    """Final ``order`` Unicode scalar values; the whole surface if shorter."""
    if not surface:
        raise ArgumentError("empty surface form")
    if order < 1:
        raise ArgumentError("order must be >= 1")
    return surface[-order:]


def augment_tokens(dataset: Dataset, spec: FeatureSpec) -> Dataset:
    """Concatenate each token's morph n-gram vector onto its embedding.

    N-grams missing from the table contribute zero vectors; the number of
    misses is logged. With no morph spec the dataset is returned as is.
    """
    if spec.morph is None:
        return dataset
    if dataset.task != TASK_POSI:
        raise UnsupportedTaskError("morph augmentation applies to posi datasets only")
    table = spec.morph.table
    n = dataset.n_items
    block = np.zeros((n, table.dim), dtype=np.float32)
    misses = 0
    for i, item in enumerate(dataset.manifest.items):
        vec = table.entries.get(last_ngram(item.surface, spec.morph.order))
        if vec is None:
            misses += 1
        else:
            block[i] = vec
    if misses:
        logger.warning("%d of %d tokens had no morph vector (zero filled)", misses, n)
    matrix = np.concatenate([dataset.matrix, block], axis=1)
    return Dataset(matrix=matrix, manifest=dataset.manifest)


def group_sentences(dataset: Dataset) -> dict[int, np.ndarray]:
    """Token rows of each sentence, ordered by token index."""
    if dataset.task != TASK_POSI:
        raise UnsupportedTaskError("sentence grouping requires a token-level dataset")
    order: dict[int, list[tuple[int, int]]] = {}
    for row, item in enumerate(dataset.manifest.items):
        order.setdefault(item.sent, []).append((item.tok, row))
    out = {}
    for sent, pairs in order.items():
        pairs.sort()
        out[sent] = dataset.matrix[[row for _, row in pairs]]
    return out


def span_repr(
    sentences: dict[int, np.ndarray], span: tuple[int, int, int], mode: str
) -> np.ndarray:
    """Vector for one (sent, start, end-inclusive) span.

    endpoints_concat yields concat(first token, last token) of width 2D;
    mean and max pool element-wise over the span's tokens (width D).
    """
    if mode not in SPAN_MODES:
        raise ArgumentError(f"unknown span mode {mode!r}")
    sent, start, end = span
    rows = sentences.get(sent)
    if rows is None:
        raise ArgumentError(f"no sentence {sent} in dataset")
    if start < 0 or end < start or end >= rows.shape[0]:
        raise ArgumentError(
            f"span ({start}, {end}) out of bounds for sentence {sent} "
            f"of {rows.shape[0]} tokens"
        )
    if mode == "endpoints_concat":
        return np.concatenate([rows[start], rows[end]])
    if mode == "mean":
        return rows[start : end + 1].mean(axis=0)
    return rows[start : end + 1].max(axis=0)


def compose_span_dataset(
    token_dataset: Dataset,
    span_manifest: DatasetManifest,
    mode: str,
    indices=None,
) -> Dataset:
    """Build a span-level dataset from token embeddings and a span manifest.

    ``indices`` optionally restricts composition to a subset of spans (the
    output manifest is restricted to match).
    """
    if span_manifest.task != TASK_COLAB:
        raise UnsupportedTaskError("span composition needs a colab manifest")
    sentences = group_sentences(token_dataset)
    items = span_manifest.items
    if indices is None:
        indices = range(len(items))
    keep = [items[i] for i in indices]
    width = 2 * token_dataset.dim if mode == "endpoints_concat" else token_dataset.dim
    matrix = np.empty((len(keep), width), dtype=np.float32)
    for out_row, item in enumerate(keep):
        matrix[out_row] = span_repr(sentences, (item.sent, item.start, item.end), mode)
    manifest = DatasetManifest(
        task=TASK_COLAB, label_set=span_manifest.label_set, items=tuple(keep)
    )
    return Dataset(matrix=matrix, manifest=manifest)


def filter_spans(manifest: DatasetManifest, excluded_labels=DEFAULT_EXCLUDED_LABELS) -> list[int]:
    """Indices of multi-word spans whose gold label is not excluded."""
    if manifest.task != TASK_COLAB:
        raise UnsupportedTaskError("span filtering needs a colab manifest")
    excluded = set(excluded_labels)
    return [
        i
        for i, item in enumerate(manifest.items)
        if item.end > item.start and item.gold not in excluded
    ]
