"""Stacked denoising autoencoder: greedy layer-wise pretraining, joint
reconstruction finetuning, deterministic encoding, and the context
(CBoW-style) input/target pairing where a token's embedding is predicted
from the concatenated embeddings of its sentence neighbours.

Layer-wise pretraining trains one small autoencoder per hidden layer: the
output of the frozen previous layers is corrupted with dropout and the new
layer learns to reconstruct the uncorrupted code. The assembled decoder
mirrors the encoder; its output layer is always linear since raw
embeddings are unbounded. In context mode only the first reconstruction
target differs: the stack maps the concatenated neighbour block to the
token's own embedding, so the first mini-autoencoder (and the assembled
decoder) reconstructs the token embedding rather than the input block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import Dataset, TASK_POSI
from .errors import ArgumentError, DivergenceError, ShapeError, UnsupportedTaskError, ValidationError
from .net import (
    LinearLayer,
    Network,
    OptimizerState,
    RngState,
    backward,
    forward,
    init_layer,
    init_optimizer,
    mse_grad,
    mse_loss,
    sgd_step,
)

DEFAULT_LATENT_DIM = 75


@dataclass(frozen=True)
class AutoencoderSpec:
    input_dim: int
    hidden_dims: tuple[int, ...] = (DEFAULT_LATENT_DIM,)
    activation: str = "identity"
    corrupt_rate: float = 0.2
    tied: bool = False

    def __post_init__(self):
        if self.input_dim < 1 or any(d < 1 for d in self.hidden_dims):
            raise ArgumentError("all dims must be positive")
        if not self.hidden_dims:
            raise ArgumentError("need at least one hidden dim")
        if not 0.0 <= self.corrupt_rate < 1.0:
            raise ArgumentError(f"corrupt_rate {self.corrupt_rate} not in [0, 1)")
        if self.activation not in ("identity", "relu"):
            raise ArgumentError(f"unknown activation {self.activation!r}")

    @property
    def latent_dim(self) -> int:
        return self.hidden_dims[-1]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ArgumentError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ArgumentError(f"momentum {self.momentum} not in [0, 1)")


@dataclass(frozen=True)
class ContextSpec:
    mode: str = "plain"
    width: int = 1

    def __post_init__(self):
        if self.mode not in ("plain", "cbow"):
            raise ArgumentError(f"unknown context mode {self.mode!r}")
        if self.mode == "cbow" and self.width < 1:
            raise ArgumentError("cbow width must be >= 1")


@dataclass
class EncoderStack:
    """Trained encoder plus mirrored decoder; the substrate the clustering
    stage refines."""

    encoder: Network
    decoder: Network
    tied: bool = False
    corrupt_rate: float = 0.2

    @property
    def latent_dim(self) -> int:
        return self.encoder.output_dim

    @property
    def input_dim(self) -> int:
        return self.encoder.input_dim

    @property
    def output_dim(self) -> int:
        return self.decoder.output_dim


def build_cbow_pairs(dataset: Dataset, width: int) -> tuple[np.ndarray, np.ndarray]:
    """One (context block, token embedding) pair per token, in dataset order.

    The input concatenates ``width`` left then ``width`` right neighbour
    embeddings from the same sentence; positions past a sentence boundary
    contribute zero vectors. Targets are the dataset rows themselves.
    """
    if dataset.task != TASK_POSI:
        raise UnsupportedTaskError("context pairs are defined for posi datasets only")
    if width < 1:
        raise ArgumentError("width must be >= 1")
    items = dataset.manifest.items
    index: dict[tuple[int, int], int] = {}
    for row, item in enumerate(items):
        key = (item.sent, item.tok)
        if key in index:
            raise ValidationError(f"duplicate (sent, tok) position {key}")
        index[key] = row
    n, d = dataset.matrix.shape
    offsets = list(range(-width, 0)) + list(range(1, width + 1))
    inputs = np.zeros((n, 2 * width * d), dtype=dataset.matrix.dtype)
    for slot, off in enumerate(offsets):
        rows = np.full(n, -1, dtype=np.int64)
        for row, item in enumerate(items):
            rows[row] = index.get((item.sent, item.tok + off), -1)
        present = rows >= 0
        block = inputs[:, slot * d : (slot + 1) * d]
        block[present] = dataset.matrix[rows[present]]
    return inputs, dataset.matrix


def _mirror_pairs(encoder: Network, decoder: Network) -> list[tuple[int, int]]:
    """(encoder layer, decoder layer) index pairs that mirror each other."""
    depth = len(encoder.layers)
    return [(k, depth - 1 - k) for k in range(depth)]


def _check_tied_shapes(encoder: Network, decoder: Network) -> None:
    for ek, dk in _mirror_pairs(encoder, decoder):
        ew = encoder.layers[ek][0].weights
        dw = decoder.layers[dk][0].weights
        if dw.shape != ew.T.shape:
            raise ArgumentError(
                "tied weights require a shape-mirrored decoder "
                f"(encoder layer {ek} is {ew.shape}, decoder layer {dk} is {dw.shape})"
            )


def _train_reconstruction(
    net: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    rng: RngState,
    corrupt_rate: float,
    tied_pairs: list[tuple[int, int]] | None = None,
    stage: str = "train",
) -> list[float]:
    """Denoising reconstruction training; returns per-epoch mean losses."""
    n = inputs.shape[0]
    opt = init_optimizer(net, cfg.learning_rate, cfg.momentum)
    trace: list[float] = []
    # overflow shows up as a non-finite loss, reported via DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                out, cache = forward(net, inputs[idx], corrupt_rate, rng, training=True)
                loss = mse_loss(out, targets[idx])
                if not np.isfinite(loss):
                    raise DivergenceError(f"{stage}: non-finite loss at epoch {epoch}")
                total += loss * len(idx)
                grads, _ = backward(net, cache, mse_grad(out, targets[idx]))
                if tied_pairs:
                    for enc_i, dec_i in tied_pairs:
                        dw_e, db_e = grads[enc_i]
                        dw_d, db_d = grads[dec_i]
                        grads[enc_i] = (dw_e + dw_d.T, db_e)
                        grads[dec_i] = (np.zeros_like(dw_d), db_d)
                sgd_step(net, grads, opt)
                if tied_pairs:
                    for enc_i, dec_i in tied_pairs:
                        dec_layer = net.layers[dec_i][0]
                        dec_layer.weights[...] = net.layers[enc_i][0].weights.T
            trace.append(total / n)
    return trace


def pretrain_layerwise(
    spec: AutoencoderSpec,
    data: np.ndarray,
    cfg: TrainConfig,
    targets: np.ndarray | None = None,
) -> EncoderStack:
    """Greedy layer-wise pretraining of the full stack.

    Each hidden layer is trained as a one-layer denoising autoencoder on
    the (frozen) codes of the layers below it. ``targets`` overrides the
    first layer's reconstruction target, which is how context pairs plug
    in; by default the stack reconstructs its own input.
    """
    if data.shape[0] == 0:
        raise ArgumentError("cannot pretrain on an empty dataset")
    if data.ndim != 2 or data.shape[1] != spec.input_dim:
        raise ShapeError(f"data shape {data.shape} does not match input_dim {spec.input_dim}")
    if targets is not None and targets.shape[0] != data.shape[0]:
        raise ShapeError("targets must align with data rows")
    rng = RngState(cfg.seed)
    current = data
    current_target = data if targets is None else targets
    enc_layers: list[tuple[LinearLayer, str]] = []
    dec_layers: list[tuple[LinearLayer, str]] = []
    for k, hidden in enumerate(spec.hidden_dims):
        in_dim = current.shape[1]
        out_dim = current_target.shape[1]
        dec_act = "identity" if k == 0 else spec.activation
        enc = init_layer(in_dim, hidden, rng)
        dec = init_layer(hidden, out_dim, rng)
        mini = Network(layers=[(enc, spec.activation), (dec, dec_act)])
        tied_pairs = None
        if spec.tied:
            _check_tied_shapes(
                Network(layers=[(enc, spec.activation)]), Network(layers=[(dec, dec_act)])
            )
            dec.weights[...] = enc.weights.T
            tied_pairs = [(0, 1)]
        _train_reconstruction(
            mini, current, current_target, cfg, rng, spec.corrupt_rate,
            tied_pairs=tied_pairs, stage=f"pretrain layer {k}",
        )
        enc_layers.append((enc, spec.activation))
        dec_layers.append((dec, dec_act))
        code, _ = forward(Network(layers=[(enc, spec.activation)]), current)
        current = code
        current_target = code
    encoder = Network(layers=enc_layers)
    decoder = Network(layers=list(reversed(dec_layers)))
    return EncoderStack(
        encoder=encoder, decoder=decoder, tied=spec.tied, corrupt_rate=spec.corrupt_rate
    )


def finetune_end2end(
    stack: EncoderStack,
    data: np.ndarray,
    cfg: TrainConfig,
    targets: np.ndarray | None = None,
) -> tuple[EncoderStack, list[float]]:
    """Train encoder and decoder jointly on (possibly context) reconstruction.

    Updates the stack in place and returns it together with the per-epoch
    loss trace.
    """
    if data.ndim != 2 or data.shape[1] != stack.input_dim:
        raise ShapeError(f"data shape {data.shape} does not match stack input {stack.input_dim}")
    if targets is None:
        targets = data
    if targets.shape != (data.shape[0], stack.output_dim):
        raise ShapeError(
            f"targets shape {targets.shape} does not match "
            f"({data.shape[0]}, {stack.output_dim})"
        )
    combined = Network(layers=stack.encoder.layers + stack.decoder.layers)
    tied_pairs = None
    if stack.tied:
        _check_tied_shapes(stack.encoder, stack.decoder)
        depth = len(stack.encoder.layers)
        tied_pairs = [(e, depth + d) for e, d in _mirror_pairs(stack.encoder, stack.decoder)]
    rng = RngState(cfg.seed)
    trace = _train_reconstruction(
        combined, data, targets, cfg, rng, stack.corrupt_rate,
        tied_pairs=tied_pairs, stage="finetune",
    )
    return stack, trace


def encode(stack: EncoderStack, data: np.ndarray) -> np.ndarray:
    """Deterministic pass through the encoder half (no dropout ever)."""
    out, _ = forward(stack.encoder, data, dropout_rate=0.0, training=False)
    return out


def reconstruction_pairs(
    dataset: Dataset, ctx: ContextSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Inputs and targets for the configured reconstruction mode."""
    if ctx.mode == "cbow":
        return build_cbow_pairs(dataset, ctx.width)
    return dataset.matrix, dataset.matrix
