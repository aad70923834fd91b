import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "dog", "cat", "ru", "##ns", "sleep", "##s", "fast",
    "very", "bark", "##ed", "today", ".", "play", "##ing",
]

HIDDEN_SIZE = 32
NUM_LAYERS = 3


@pytest.fixture(scope="session")
def tiny_bert(tmp_path_factory):
    """A randomly initialized word-piece BERT saved to a local directory."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    model_dir = tmp_path_factory.mktemp("tinybert")
    (model_dir / "vocab.txt").write_text("\n".join(VOCAB))
    tokenizer = BertTokenizer(str(model_dir / "vocab.txt"))
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=HIDDEN_SIZE,
        num_hidden_layers=NUM_LAYERS,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    model = BertModel(config)
    model.save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return str(model_dir)


@pytest.fixture()
def text_corpus(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("the dog runs fast .\nthe cat sleeps today .\na dog barked .\n")
    return path


@pytest.fixture()
def conll_corpus(tmp_path):
    lines = [
        "the\tDT", "dog\tNN", "runs\tVB", "", "a\tDT", "cat\tNN", "sleeps\tVB", ".\t.",
    ]
    path = tmp_path / "corpus.conll"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture()
def treebank(tmp_path):
    trees = """
( (S (NP-SBJ (DT the) (NN dog)) (VP (VB runs) (ADVP (RB fast))) (. .)) )
( (S (NP (DT a) (NN cat)) (VP (VB sleeps))) )
"""
    path = tmp_path / "trees.mrg"
    path.write_text(trees)
    return path
