"""Extraction round trips, validated with the clustering toolkit's own
readers (the acceptance surface between the two packages)."""

import json

import numpy as np
import pytest

from extractor import cli
from extractor.corpus import read_tokenized
from extractor.embeddings import AlignmentFailure, extract_word_vectors, load_model, select_layers
from extractor.formats import write_vec
from extractor.morph import VecLookup, extract_morph, last_ngram

from sdec.dataio import load_dataset, read_manifest, read_semb, read_vec_table
from sdec.feats import compose_span_dataset, filter_spans

from conftest import HIDDEN_SIZE, NUM_LAYERS


class TestWordVectors:
    def test_shapes_match_corpus(self, tiny_bert, text_corpus):
        tokenizer, model = load_model(tiny_bert)
        sentences = [s.tokens for s in read_tokenized(text_corpus)]
        n_tokens = sum(len(s) for s in sentences)
        result = extract_word_vectors(tokenizer, model, sentences)
        assert result.vectors.shape == (n_tokens, NUM_LAYERS, HIDDEN_SIZE)
        assert result.skipped == 0 and result.kept == [0, 1, 2]

    def test_single_piece_word_equals_piece_vector(self, tiny_bert):
        import torch

        tokenizer, model = load_model(tiny_bert)
        result = extract_word_vectors(tokenizer, model, [["the", "dog"]])
        ids = torch.tensor(
            [[tokenizer.cls_token_id]
             + tokenizer.convert_tokens_to_ids(["the", "dog"])
             + [tokenizer.sep_token_id]]
        )
        with torch.no_grad():
            out = model(input_ids=ids, attention_mask=torch.ones_like(ids),
                        output_hidden_states=True)
        for layer in range(NUM_LAYERS):
            direct = out.hidden_states[layer + 1][0, 1].numpy()
            np.testing.assert_allclose(result.vectors[0, layer], direct, atol=1e-6)

    def test_multi_piece_word_is_piece_mean(self, tiny_bert):
        tokenizer, model = load_model(tiny_bert)
        # "runs" tokenizes to two pieces in the tiny vocab
        assert len(tokenizer.tokenize("runs")) == 2
        result = extract_word_vectors(tokenizer, model, [["runs"]])
        assert result.vectors.shape[0] == 1

    def test_include_embedding_layer_flag(self, tiny_bert):
        tokenizer, model = load_model(tiny_bert)
        result = extract_word_vectors(
            tokenizer, model, [["the"]], include_embedding_layer=True
        )
        assert result.vectors.shape[1] == NUM_LAYERS + 1

    def test_long_sentences_skipped(self, tiny_bert):
        tokenizer, model = load_model(tiny_bert)
        result = extract_word_vectors(
            tokenizer, model, [["the"] * 30, ["dog"]], max_len=16
        )
        assert result.skipped == 1
        assert result.kept == [1]
        assert result.vectors.shape[0] == 1

    def test_select_layers(self, rng=np.random.default_rng(0)):
        vectors = rng.standard_normal((4, 6, 3)).astype(np.float32)
        np.testing.assert_array_equal(select_layers(vectors, "all"), vectors)
        np.testing.assert_array_equal(select_layers(vectors, "1-2"), vectors[:, [1, 2]])
        np.testing.assert_array_equal(select_layers(vectors, "4"), vectors[:, [4]])
        with pytest.raises(ValueError):
            select_layers(vectors, "5-9")


class TestEmbeddingsCommand:
    def test_round_trip_through_sdec(self, tiny_bert, text_corpus, tmp_path, capsys):
        out_dir = tmp_path / "out"
        rc = cli.main(
            [
                "embeddings", "--model", tiny_bert, "--in", str(text_corpus),
                "--out", str(out_dir), "--prefix", "demo",
            ]
        )
        assert rc == 0
        info = json.loads(capsys.readouterr().out)
        tensor = read_semb(out_dir / "demo.semb")
        corpus_tokens = sum(len(l.split()) for l in text_corpus.read_text().splitlines())
        assert tensor.n_items == corpus_tokens == info["n_items"]
        assert tensor.n_layers == NUM_LAYERS
        assert tensor.dim == HIDDEN_SIZE
        ds = load_dataset(out_dir / "demo.semb", out_dir / "demo.manifest.json", "all")
        assert ds.n_items == corpus_tokens
        assert all(item.gold == "_" for item in ds.manifest.items)

    def test_conll_gold_tags_survive(self, tiny_bert, conll_corpus, tmp_path):
        out_dir = tmp_path / "out"
        rc = cli.main(
            [
                "embeddings", "--model", tiny_bert, "--in", str(conll_corpus),
                "--format", "conll", "--out", str(out_dir), "--prefix", "tagged",
            ]
        )
        assert rc == 0
        manifest = read_manifest(out_dir / "tagged.manifest.json")
        assert manifest.label_set == (".", "DT", "NN", "VB")
        assert [i.gold for i in manifest.items][:3] == ["DT", "NN", "VB"]

    def test_unknown_word_uses_unk_piece(self, tiny_bert, tmp_path):
        corpus_path = tmp_path / "oov.txt"
        corpus_path.write_text("zyzzyva dog\n")
        out_dir = tmp_path / "out"
        rc = cli.main(
            [
                "embeddings", "--model", tiny_bert, "--in", str(corpus_path),
                "--out", str(out_dir),
            ]
        )
        assert rc == 0
        assert read_semb(out_dir / "oov.semb").n_items == 2


class TestSpansCommand:
    def test_span_manifest_composes_downstream(self, tiny_bert, treebank, tmp_path):
        out_dir = tmp_path / "out"
        rc = cli.main(
            ["spans", "--model", tiny_bert, "--in", str(treebank), "--out", str(out_dir)]
        )
        assert rc == 0
        token_ds = load_dataset(
            out_dir / "trees.semb", out_dir / "trees.manifest.json", "all"
        )
        span_manifest = read_manifest(out_dir / "trees.spans.json")
        assert token_ds.n_items == 8  # 5 + 3 tokens
        assert {i.gold for i in span_manifest.items} >= {"NP", "VP", "S", "TOP"}
        span_ds = compose_span_dataset(token_ds, span_manifest, "endpoints_concat")
        assert span_ds.matrix.shape == (len(span_manifest), 2 * HIDDEN_SIZE)
        kept = filter_spans(span_manifest)
        # single-word spans (ADVP, VP of sentence 2) and TOP are dropped
        golds_kept = [span_manifest.items[i].gold for i in kept]
        assert "TOP" not in golds_kept
        assert all(
            span_manifest.items[i].end > span_manifest.items[i].start for i in kept
        )


class TestMorph:
    def test_last_ngram(self):
        assert last_ngram("playing", 3) == "ing"
        assert last_ngram("to", 3) == "to"

    def test_lookup_source_round_trip(self, tmp_path, capsys):
        src = tmp_path / "src.vec"
        rng = np.random.default_rng(1)
        grams = {"ing": None, "dog": None, "eps": None}
        entries = {g: rng.standard_normal(300).astype(np.float32) for g in grams}
        write_vec(src, entries)
        vocab = tmp_path / "vocab.txt"
        vocab.write_text("playing\nsleeping\ndog\n")
        out_dir = tmp_path / "out"
        rc = cli.main(
            [
                "morph", "--in", str(vocab), "--vectors", str(src),
                "--order", "3", "--out", str(out_dir),
            ]
        )
        assert rc == 0
        table = read_vec_table(out_dir / "morph.vec")
        assert table.dim == 300
        assert set(table.entries) == {"ing", "dog"}
        np.testing.assert_allclose(table.entries["ing"], entries["ing"], atol=1e-7)

    def test_vocab_from_manifest(self, tiny_bert, conll_corpus, tmp_path):
        out_dir = tmp_path / "out"
        assert cli.main(
            [
                "embeddings", "--model", tiny_bert, "--in", str(conll_corpus),
                "--format", "conll", "--out", str(out_dir), "--prefix", "t",
            ]
        ) == 0
        src = tmp_path / "src.vec"
        write_vec(src, {"dog": np.float32([1.0, 2.0]), "cat": np.float32([3.0, 4.0])})
        rc = cli.main(
            [
                "morph", "--manifest", str(out_dir / "t.manifest.json"),
                "--vectors", str(src), "--out", str(out_dir),
            ]
        )
        assert rc == 0
        table = read_vec_table(out_dir / "morph.vec")
        assert set(table.entries) == {"dog", "cat"}

    def test_missing_source_fails(self, tmp_path, capsys):
        vocab = tmp_path / "vocab.txt"
        vocab.write_text("word\n")
        rc = cli.main(
            ["morph", "--in", str(vocab), "--vectors", str(tmp_path / "nope.vec"),
             "--out", str(tmp_path)]
        )
        assert rc == 3

    def test_extract_morph_dedups(self, tmp_path):
        src = tmp_path / "src.vec"
        write_vec(src, {"ing": np.float32([1.0])})
        entries = extract_morph(["playing", "going", "running"], 3, VecLookup(src))
        assert list(entries) == ["ing"]


class TestAcceptanceSecondary:
    def test_extractor_round_trip_criterion(self, tiny_bert, text_corpus, tmp_path, capsys):
        """Exports load through the toolkit's readers with aligned shapes,
        and morph output parses at the expected width."""
        out_dir = tmp_path / "acc"
        rc = cli.main(
            [
                "embeddings", "--model", tiny_bert, "--in", str(text_corpus),
                "--out", str(out_dir), "--prefix", "acc",
            ]
        )
        assert rc == 0
        ds = load_dataset(out_dir / "acc.semb", out_dir / "acc.manifest.json", "all")
        n_tokens = sum(len(l.split()) for l in text_corpus.read_text().splitlines())
        assert ds.n_items == n_tokens
        tensor = read_semb(out_dir / "acc.semb")
        assert tensor.dim == HIDDEN_SIZE

        rng = np.random.default_rng(2)
        grams = sorted({w[-3:] for line in text_corpus.read_text().splitlines() for w in line.split()})
        src = tmp_path / "ft.vec"
        write_vec(src, {g: rng.standard_normal(300).astype(np.float32) for g in grams})
        vocab = tmp_path / "vocab.txt"
        vocab.write_text("\n".join(sorted({w for line in text_corpus.read_text().splitlines() for w in line.split()})))
        rc = cli.main(
            ["morph", "--in", str(vocab), "--vectors", str(src), "--out", str(out_dir)]
        )
        assert rc == 0
        table = read_vec_table(out_dir / "morph.vec")
        assert table.dim == 300
        print(
            "PASS: extractor outputs load via the toolkit readers "
            f"(n_items={ds.n_items}, dim={tensor.dim}, morph dim={table.dim})"
        )
