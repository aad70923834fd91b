import numpy as np
import pytest

from sdec.dataio import Dataset, DatasetManifest, ColabItem, PosiItem
from sdec.errors import ArgumentError, DivergenceError, UnsupportedTaskError
from sdec.net import LinearLayer, Network, RngState, forward, init_layer
from sdec.sae import (
    AutoencoderSpec,
    ContextSpec,
    EncoderStack,
    TrainConfig,
    _train_reconstruction,
    build_cbow_pairs,
    encode,
    finetune_end2end,
    pretrain_layerwise,
    reconstruction_pairs,
)

from conftest import posi_manifest, toy_dataset


def lowrank_data(n=600, dim=20, rank=4, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    latent = rng.standard_normal((n, rank))
    lift = rng.standard_normal((dim, rank)) / np.sqrt(rank)
    x = (latent @ lift.T) * scale
    x = x / x.std()
    return x.astype(np.float32)


def stack_bytes(stack):
    parts = []
    for net in (stack.encoder, stack.decoder):
        for layer, _ in net.layers:
            parts.append(layer.weights.tobytes())
            parts.append(layer.bias.tobytes())
    return b"".join(parts)


class TestCbowPairs:
    def make_ds(self):
        matrix = np.arange(12, dtype=np.float32).reshape(6, 2)
        items = tuple(
            PosiItem(sent=i // 3, tok=i % 3, surface=f"t{i}", gold="A") for i in range(6)
        )
        manifest = DatasetManifest(task="posi", label_set=("A",), items=items)
        return Dataset(matrix=matrix, manifest=manifest)

    def test_interior_token(self):
        ds = self.make_ds()
        inputs, targets = build_cbow_pairs(ds, width=1)
        # token 1 of sentence 0: left neighbour row 0, right neighbour row 2
        np.testing.assert_array_equal(inputs[1], np.concatenate([ds.matrix[0], ds.matrix[2]]))
        np.testing.assert_array_equal(targets[1], ds.matrix[1])

    def test_boundary_padding(self):
        ds = self.make_ds()
        inputs, _ = build_cbow_pairs(ds, width=1)
        np.testing.assert_array_equal(inputs[0], np.concatenate([[0, 0], ds.matrix[1]]))
        np.testing.assert_array_equal(inputs[2], np.concatenate([ds.matrix[1], [0, 0]]))

    def test_pair_count_and_width(self, rng):
        for _ in range(5):
            n = int(rng.integers(4, 40))
            dim = int(rng.integers(1, 6))
            width = int(rng.integers(1, 3))
            matrix = rng.standard_normal((n, dim)).astype(np.float32)
            ds = Dataset(matrix=matrix, manifest=posi_manifest(n, sentence_len=5))
            inputs, targets = build_cbow_pairs(ds, width=width)
            assert inputs.shape == (n, 2 * width * dim)
            assert targets is ds.matrix

    def test_colab_rejected(self):
        manifest = DatasetManifest(
            task="colab", label_set=("NP",), items=(ColabItem(0, 0, 1, "NP"),)
        )
        ds = Dataset(matrix=np.zeros((1, 2), np.float32), manifest=manifest)
        with pytest.raises(UnsupportedTaskError):
            build_cbow_pairs(ds, 1)

    def test_reconstruction_pairs_plain(self):
        ds = self.make_ds()
        inputs, targets = reconstruction_pairs(ds, ContextSpec(mode="plain"))
        assert inputs is ds.matrix and targets is ds.matrix


class TestPretrain:
    def test_empty_data_rejected(self):
        spec = AutoencoderSpec(input_dim=4, hidden_dims=(2,))
        with pytest.raises(ArgumentError):
            pretrain_layerwise(spec, np.zeros((0, 4), np.float32), TrainConfig(epochs=1))

    def test_single_layer_equals_direct_training(self):
        """Layer-wise pretraining of a depth-1 stack is exactly one
        denoising autoencoder trained on the data."""
        data = lowrank_data(n=200, dim=10, rank=3, seed=1)
        cfg = TrainConfig(epochs=3, batch_size=32, learning_rate=0.005, seed=7)
        spec = AutoencoderSpec(input_dim=10, hidden_dims=(4,))
        stack = pretrain_layerwise(spec, data, cfg)

        rng = RngState(cfg.seed)
        enc = init_layer(10, 4, rng)
        dec = init_layer(4, 10, rng)
        direct = Network(layers=[(enc, "identity"), (dec, "identity")])
        _train_reconstruction(direct, data, data, cfg, rng, spec.corrupt_rate)
        assert stack.encoder.layers[0][0].weights.tobytes() == enc.weights.tobytes()
        assert stack.decoder.layers[0][0].weights.tobytes() == dec.weights.tobytes()
        assert stack.encoder.layers[0][0].bias.tobytes() == enc.bias.tobytes()

    def test_dim_chaining_two_layers(self):
        data = lowrank_data(n=120, dim=12, rank=3, seed=2)
        spec = AutoencoderSpec(input_dim=12, hidden_dims=(8, 3))
        cfg = TrainConfig(epochs=1, batch_size=32, learning_rate=0.001, seed=0)
        stack = pretrain_layerwise(spec, data, cfg)
        enc_dims = [(l.in_dim, l.out_dim) for l, _ in stack.encoder.layers]
        dec_dims = [(l.in_dim, l.out_dim) for l, _ in stack.decoder.layers]
        assert enc_dims == [(12, 8), (8, 3)]
        assert dec_dims == [(3, 8), (8, 12)]
        assert encode(stack, data).shape == (120, 3)

    def test_reconstruction_improves_on_lowrank_data(self):
        data = lowrank_data(n=2000, dim=50, rank=5, seed=3)
        spec = AutoencoderSpec(input_dim=50, hidden_dims=(5,))
        init_cfg = TrainConfig(epochs=0, batch_size=64, learning_rate=0.005, seed=11)
        trained_cfg = TrainConfig(epochs=40, batch_size=64, learning_rate=0.005, seed=11)

        def recon_mse(stack):
            z = encode(stack, data)
            out, _ = forward(stack.decoder, z)
            return float(np.mean(np.sum((out - data) ** 2, axis=1)))

        initial = recon_mse(pretrain_layerwise(spec, data, init_cfg))
        final = recon_mse(pretrain_layerwise(spec, data, trained_cfg))
        assert final < 0.1 * initial

    def test_cbow_first_layer_target_dims(self):
        ds = toy_dataset(n=30, dim=4, sentence_len=5)
        inputs, targets = build_cbow_pairs(ds, width=1)
        spec = AutoencoderSpec(input_dim=8, hidden_dims=(3,))
        cfg = TrainConfig(epochs=1, batch_size=8, learning_rate=0.001, seed=0)
        stack = pretrain_layerwise(spec, inputs, cfg, targets=targets)
        assert stack.encoder.input_dim == 8
        assert stack.decoder.output_dim == 4

    def test_tied_weights_mirrored(self):
        data = lowrank_data(n=100, dim=8, rank=2, seed=4)
        spec = AutoencoderSpec(input_dim=8, hidden_dims=(3,), tied=True)
        cfg = TrainConfig(epochs=2, batch_size=16, learning_rate=0.002, seed=1)
        stack = pretrain_layerwise(spec, data, cfg)
        np.testing.assert_array_equal(
            stack.decoder.layers[0][0].weights, stack.encoder.layers[0][0].weights.T
        )

    def test_tied_cbow_shape_conflict(self):
        ds = toy_dataset(n=30, dim=4, sentence_len=5)
        inputs, targets = build_cbow_pairs(ds, width=1)
        spec = AutoencoderSpec(input_dim=8, hidden_dims=(3,), tied=True)
        cfg = TrainConfig(epochs=1, batch_size=8, learning_rate=0.001, seed=0)
        with pytest.raises(ArgumentError):
            pretrain_layerwise(spec, inputs, cfg, targets=targets)


class TestFinetune:
    def make_stack(self, data, seed=0, latent=4):
        spec = AutoencoderSpec(input_dim=data.shape[1], hidden_dims=(latent,))
        return pretrain_layerwise(
            spec, data, TrainConfig(epochs=2, batch_size=32, learning_rate=0.002, seed=seed)
        )

    def test_zero_epochs_is_identity(self):
        data = lowrank_data(n=100, dim=10, rank=3)
        stack = self.make_stack(data)
        before = stack_bytes(stack)
        stack, trace = finetune_end2end(stack, data, TrainConfig(epochs=0, seed=1))
        assert stack_bytes(stack) == before
        assert trace == []

    def test_loss_decreases_on_lowrank_data(self):
        data = lowrank_data(n=800, dim=20, rank=4, seed=5)
        stack = self.make_stack(data, seed=2)
        _, trace = finetune_end2end(
            stack, data, TrainConfig(epochs=20, batch_size=64, learning_rate=0.005, seed=3)
        )
        assert np.mean(trace[-5:]) <= np.mean(trace[:5])

    def test_divergence_reports_epoch(self):
        data = lowrank_data(n=200, dim=30, rank=5, seed=6)
        stack = self.make_stack(data, seed=0, latent=10)
        with pytest.raises(DivergenceError, match="finetune.*epoch"):
            finetune_end2end(
                stack, data, TrainConfig(epochs=50, batch_size=16, learning_rate=5.0, seed=0)
            )


class TestEncode:
    def test_identity_square_layer(self, rng):
        layer = LinearLayer(weights=np.eye(3, dtype=np.float32), bias=np.zeros(3, np.float32))
        stack = EncoderStack(
            encoder=Network(layers=[(layer, "identity")]),
            decoder=Network(layers=[(init_layer(3, 3, RngState(0)), "identity")]),
        )
        data = rng.standard_normal((5, 3)).astype(np.float32)
        np.testing.assert_array_equal(encode(stack, data), data)

    def test_empty_batch(self):
        data = lowrank_data(n=50, dim=6, rank=2)
        spec = AutoencoderSpec(input_dim=6, hidden_dims=(2,))
        stack = pretrain_layerwise(spec, data, TrainConfig(epochs=1, seed=0, learning_rate=0.001))
        out = encode(stack, np.zeros((0, 6), np.float32))
        assert out.shape == (0, 2)

    def test_deterministic(self):
        data = lowrank_data(n=50, dim=6, rank=2)
        spec = AutoencoderSpec(input_dim=6, hidden_dims=(2,), corrupt_rate=0.5)
        stack = pretrain_layerwise(spec, data, TrainConfig(epochs=1, seed=0, learning_rate=0.001))
        assert encode(stack, data).tobytes() == encode(stack, data).tobytes()
