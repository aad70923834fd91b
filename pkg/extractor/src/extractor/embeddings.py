"""Per-layer word vectors from a pretrained transformer.

Each whitespace word is tokenized into subword pieces on its own, so the
piece-to-word alignment is exact by construction; a word's vector at a
layer is the mean of its piece vectors at that layer. The embedding-table
layer (hidden state 0) is excluded unless requested, leaving one tensor
slice per encoder layer so downstream pooling can reproduce any layer
subset without re-extraction. Sentences whose piece count exceeds the
model limit are skipped whole (never truncated) and counted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

logger = logging.getLogger(__name__)


class AlignmentFailure(RuntimeError):
    """A word produced no subword pieces; exports would misalign."""


@dataclass
class ExtractionResult:
    vectors: np.ndarray  # (n_tokens, n_layers, dim)
    kept: list  # indices of surviving sentences, in input order
    skipped: int


def load_model(model_id: str):
    """Load tokenizer and model from a hub id or a local directory."""
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_id, use_fast=False)
    model = AutoModel.from_pretrained(model_id)
    model.eval()
    return tokenizer, model


def _piece_groups(tokenizer, words: list) -> list[list[str]]:
    groups = []
    for word in words:
        pieces = tokenizer.tokenize(word)
        if not pieces:
            raise AlignmentFailure(f"word {word!r} produced no subword pieces")
        groups.append(pieces)
    return groups


def extract_word_vectors(
    tokenizer,
    model,
    sentences: list[list[str]],
    max_len: int = 512,
    batch_size: int = 16,
    include_embedding_layer: bool = False,
) -> ExtractionResult:
    """Word-level vectors for every token of every surviving sentence."""
    cls = tokenizer.cls_token_id
    sep = tokenizer.sep_token_id
    pad = tokenizer.pad_token_id

    prepared = []  # (sentence index, ids, word piece slices)
    skipped = 0
    for idx, words in enumerate(sentences):
        groups = _piece_groups(tokenizer, words)
        ids = [cls]
        slices = []
        for pieces in groups:
            start = len(ids)
            ids.extend(tokenizer.convert_tokens_to_ids(pieces))
            slices.append((start, len(ids)))
        ids.append(sep)
        if len(ids) > max_len:
            skipped += 1
            continue
        prepared.append((idx, ids, slices))
    if skipped:
        logger.warning("skipped %d sentences longer than %d pieces", skipped, max_len)

    per_sentence: list[np.ndarray] = []
    with torch.no_grad():
        for start in range(0, len(prepared), batch_size):
            chunk = prepared[start : start + batch_size]
            width = max(len(ids) for _, ids, _ in chunk)
            input_ids = torch.full((len(chunk), width), pad, dtype=torch.long)
            mask = torch.zeros((len(chunk), width), dtype=torch.long)
            for row, (_, ids, _) in enumerate(chunk):
                input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
                mask[row, : len(ids)] = 1
            out = model(input_ids=input_ids, attention_mask=mask, output_hidden_states=True)
            hidden = out.hidden_states  # (L+1) x (B, T, D)
            layers = hidden if include_embedding_layer else hidden[1:]
            stacked = torch.stack(layers, dim=2)  # (B, T, L, D)
            for row, (_, _, slices) in enumerate(chunk):
                words = [
                    stacked[row, a:b].mean(dim=0).cpu().numpy() for a, b in slices
                ]
                per_sentence.append(np.stack(words).astype(np.float32))

    if per_sentence:
        vectors = np.concatenate(per_sentence, axis=0)
    else:
        n_layers = model.config.num_hidden_layers + (1 if include_embedding_layer else 0)
        vectors = np.zeros((0, n_layers, model.config.hidden_size), dtype=np.float32)
    return ExtractionResult(
        vectors=vectors, kept=[idx for idx, _, _ in prepared], skipped=skipped
    )


def select_layers(vectors: np.ndarray, spec: str) -> np.ndarray:
    """Restrict the layer axis: "all", a single index, or a range "a-b"."""
    if spec in (None, "all"):
        return vectors
    if "-" in spec:
        lo, _, hi = spec.partition("-")
        idx = list(range(int(lo), int(hi) + 1))
    else:
        idx = [int(spec)]
    n = vectors.shape[1]
    if not idx or min(idx) < 0 or max(idx) >= n:
        raise ValueError(f"layer selection {spec!r} out of range for {n} layers")
    return vectors[:, idx, :]
