"""Corpus readers: whitespace-tokenized text, two-column CoNLL-style
tagged text, and bracketed (Penn-style) constituency trees.

A parsed sentence is (tokens, pos_tags or None, constituent spans or
None); spans are (start, end_inclusive, label) over token positions and
come from every internal node above the preterminal layer, so single-word
constituents are included (downstream evaluation filters them). The
unlabeled root wrapper common in treebank files is exported as ``TOP``.
Bracketed trees describe contiguous spans by construction, so there are
no discontinuous constituents to skip.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class CorpusError(ValueError):
    pass


@dataclass
class Sentence:
    tokens: list
    pos_tags: list | None = None
    spans: list | None = None  # (start, end inclusive, label)


def read_tokenized(path) -> list[Sentence]:
    """One sentence per line, whitespace tokens, no annotations."""
    sentences = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        tokens = line.split()
        if tokens:
            sentences.append(Sentence(tokens=tokens))
    return sentences


def read_conll(path) -> list[Sentence]:
    """token<TAB>tag lines with blank-line sentence separators."""
    sentences = []
    tokens: list = []
    tags: list = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            if tokens:
                sentences.append(Sentence(tokens=tokens, pos_tags=tags))
                tokens, tags = [], []
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            parts = line.split()
        if len(parts) != 2:
            raise CorpusError(f"{path}:{lineno}: expected 'token<TAB>tag', got {line!r}")
        tokens.append(parts[0])
        tags.append(parts[1])
    if tokens:
        sentences.append(Sentence(tokens=tokens, pos_tags=tags))
    return sentences


@dataclass
class _Node:
    label: str
    children: list
    token: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    @property
    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and self.children[0].is_leaf


def _tokenize_sexpr(text: str):
    depth = 0
    buf = []
    for ch in text:
        if ch == "(":
            if buf and "".join(buf).strip():
                yield "".join(buf).strip()
            buf = []
            depth += 1
            yield "("
        elif ch == ")":
            if buf and "".join(buf).strip():
                yield "".join(buf).strip()
            buf = []
            depth -= 1
            if depth < 0:
                raise CorpusError("unbalanced ')'")
            yield ")"
        elif ch.isspace():
            if buf and "".join(buf).strip():
                yield "".join(buf).strip()
            buf = []
        else:
            buf.append(ch)
    if depth != 0:
        raise CorpusError("unbalanced '('")
    if buf and "".join(buf).strip():
        raise CorpusError(f"trailing text {''.join(buf)!r}")


def _parse_tree(tokens: list, pos: int) -> tuple[_Node, int]:
    if tokens[pos] != "(":
        raise CorpusError(f"expected '(' at {pos}")
    pos += 1
    label = ""
    if pos < len(tokens) and tokens[pos] not in ("(", ")"):
        label = tokens[pos]
        pos += 1
    children: list = []
    word: str | None = None
    while pos < len(tokens) and tokens[pos] != ")":
        if tokens[pos] == "(":
            child, pos = _parse_tree(tokens, pos)
            children.append(child)
        else:
            word = tokens[pos]
            pos += 1
    if pos >= len(tokens):
        raise CorpusError("unterminated tree")
    pos += 1  # consume ')'
    if word is not None and children:
        raise CorpusError(f"node {label!r} mixes a word with subtrees")
    if word is not None:
        return _Node(label=label, children=[_Node(label="", children=[], token=word)]), pos
    return _Node(label=label, children=children), pos


def normalize_label(label: str) -> str:
    """Strip functional / coindexing decorations (NP-SBJ-1 -> NP)."""
    if not label:
        return "TOP"
    base = label
    for sep in ("-", "="):
        idx = base.find(sep)
        if idx > 0:
            base = base[:idx]
    return base or label


def _collect(node: _Node, start: int, tokens: list, tags: list, spans: list,
             keep_decorations: bool) -> int:
    """Walk the tree, filling tokens/tags/spans; returns the end position."""
    if node.is_preterminal:
        tokens.append(node.children[0].token)
        tags.append(node.label if keep_decorations else normalize_label(node.label))
        return start + 1
    pos = start
    for child in node.children:
        pos = _collect(child, pos, tokens, tags, spans, keep_decorations)
    label = node.label if (keep_decorations and node.label) else normalize_label(node.label)
    if pos > start:
        spans.append((start, pos - 1, label))
    return pos


def read_ptb(path, keep_decorations: bool = False) -> list[Sentence]:
    """Bracketed trees, one or more per file, possibly spanning lines."""
    text = Path(path).read_text(encoding="utf-8")
    stream = list(_tokenize_sexpr(text))
    sentences = []
    pos = 0
    while pos < len(stream):
        node, pos = _parse_tree(stream, pos)
        # unwrap a bare "( (S ...) )" wrapper as the TOP constituent
        if node.label == "" and len(node.children) == 1 and not node.is_preterminal:
            inner = node.children[0]
            tokens, tags, spans = [], [], []
            end = _collect(inner, 0, tokens, tags, spans, keep_decorations)
            spans.append((0, end - 1, "TOP"))
        else:
            tokens, tags, spans = [], [], []
            _collect(node, 0, tokens, tags, spans, keep_decorations)
        if not tokens:
            raise CorpusError(f"{path}: tree without tokens")
        sentences.append(Sentence(tokens=tokens, pos_tags=tags, spans=spans))
    return sentences


READERS = {"text": read_tokenized, "conll": read_conll, "ptb": read_ptb}
