import itertools

import numpy as np
import pytest

from sdec.dataio import DatasetManifest, Dataset, EmbeddingTensor, PosiItem
from sdec.dec import total_loss_and_grads
from sdec.net import (
    RngState,
    cast_network,
    finite_difference_errors,
    init_network,
    parameter_arrays,
)
from sdec.sae import EncoderStack


def random_tensor(rng, n_items, n_layers, dim) -> EmbeddingTensor:
    values = rng.standard_normal((n_items, n_layers, dim)).astype(np.float32)
    return EmbeddingTensor(values=values)


def posi_manifest(n, sentence_len=5, labels=("A", "B"), rng=None) -> DatasetManifest:
    rng = rng or np.random.default_rng(0)
    items = tuple(
        PosiItem(
            sent=i // sentence_len,
            tok=i % sentence_len,
            surface=f"w{i}",
            gold=labels[int(rng.integers(len(labels)))],
        )
        for i in range(n)
    )
    return DatasetManifest(task="posi", label_set=tuple(labels), items=items)


def toy_dataset(n=12, dim=4, sentence_len=4, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((n, dim)).astype(np.float32)
    return Dataset(matrix=matrix, manifest=posi_manifest(n, sentence_len, rng=rng))


def brute_force_assignment(counts: np.ndarray) -> int:
    """Exhaustive best injective cluster->label matching (test oracle)."""
    m, g = counts.shape
    if m > g:
        counts = np.concatenate([counts, np.zeros((m, m - g), dtype=counts.dtype)], axis=1)
        g = m
    best = 0
    for perm in itertools.permutations(range(g), m):
        best = max(best, sum(counts[i, perm[i]] for i in range(m)))
    return int(best)


def objective_fd_error(
    seed, in_dim, latent, out_dim, m, batch, nu, lam, activation="identity", epsilon=1e-5
):
    """Finite-difference error of the joint clustering objective gradients
    (encoder, decoder and centers; the target distribution held constant)."""
    rng_np = np.random.default_rng(seed)
    rng = RngState(seed)
    stack = EncoderStack(
        encoder=cast_network(init_network([in_dim, latent], [activation], rng), np.float64),
        decoder=cast_network(init_network([latent, out_dim], ["identity"], rng), np.float64),
    )
    centers = rng_np.standard_normal((m, latent))
    x = rng_np.standard_normal((batch, in_dim))
    target = rng_np.standard_normal((batch, out_dim))
    p = rng_np.random((batch, m)) + 1e-3
    p /= p.sum(1, keepdims=True)

    def current():
        _, _, total, eg, dg, dmu = total_loss_and_grads(stack, centers, x, target, p, nu, lam)
        flat = []
        for dw, db in eg + dg:
            flat.extend([dw, db])
        flat.append(dmu)
        return total, flat

    _, analytic = current()
    params = parameter_arrays(stack.encoder) + parameter_arrays(stack.decoder) + [centers]
    return finite_difference_errors(params, lambda: current()[0], analytic, epsilon)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
