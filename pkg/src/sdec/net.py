"""Minimal dense feedforward substrate: forward with denoising dropout,
mean squared error, exact backprop, and SGD with classical momentum.

Everything is float32 and deterministic given a seed. The input (and only
the input) may be corrupted with inverted dropout during training, which
is how the denoising autoencoders in :mod:`sdec.sae` inject noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DivergenceError, ShapeError, StateError

RNG_ALGORITHM = "pcg64"

ACTIVATIONS = ("identity", "relu")


@dataclass
class RngState:
    """Seeded random stream. Same seed, same platform: identical sequence."""

    seed: int
    algorithm: str = RNG_ALGORITHM
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.algorithm != RNG_ALGORITHM:
            raise ArgumentError(f"unknown rng algorithm {self.algorithm!r}")
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self.gen.uniform(low, high, size).astype(np.float32)

    def random(self, size) -> np.ndarray:
        return self.gen.random(size, dtype=np.float64)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)


@dataclass
class LinearLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("weights must be 2-d and bias 1-d")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"weights {self.weights.shape} and bias {self.bias.shape} disagree"
            )
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise DivergenceError("layer parameters are not finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    """Ordered (LinearLayer, activation) pairs; adjacent dims must chain."""

    layers: list  # of (LinearLayer, str)

    def __post_init__(self):
        for layer, act in self.layers:
            if act not in ACTIVATIONS:
                raise ArgumentError(f"unknown activation {act!r}")
        for (a, _), (b, _) in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].out_dim


def init_layer(in_dim: int, out_dim: int, rng: RngState) -> LinearLayer:
    """Uniform(-1/sqrt(in_dim), +1/sqrt(in_dim)) weights, zero bias."""
    bound = 1.0 / np.sqrt(in_dim)
    weights = rng.uniform(-bound, bound, (out_dim, in_dim))
    bias = np.zeros(out_dim, dtype=np.float32)
    return LinearLayer(weights=weights, bias=bias)


def init_network(dims: list[int], activations: list[str], rng: RngState) -> Network:
    if len(activations) != len(dims) - 1:
        raise ArgumentError("need one activation per layer")
    layers = [
        (init_layer(dims[k], dims[k + 1], rng), activations[k])
        for k in range(len(dims) - 1)
    ]
    return Network(layers=layers)


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations captured for backward."""

    net: Network
    dropped_input: np.ndarray
    inputs: list  # input to each layer
    preacts: list  # z of each layer


def _apply_activation(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0)
    return z


def forward(
    net: Network,
    batch: np.ndarray,
    dropout_rate: float = 0.0,
    rng: RngState | None = None,
    training: bool = False,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network; dropout corrupts the input only, and only in training.

    Inverted dropout: surviving entries are scaled by 1/(1-rate) so the
    expectation over masks equals the clean input.
    """
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(
            f"batch shape {batch.shape} does not match input dim {net.input_dim}"
        )
    if not 0.0 <= dropout_rate < 1.0:
        raise ArgumentError(f"dropout rate {dropout_rate} not in [0, 1)")
    x = batch
    if training and dropout_rate > 0.0:
        if rng is None:
            raise ArgumentError("dropout requires an RngState")
        mask = (rng.random(batch.shape) >= dropout_rate).astype(batch.dtype)
        x = batch * mask / (1.0 - dropout_rate)
    dropped = x
    inputs, preacts = [], []
    for layer, act in net.layers:
        inputs.append(x)
        z = x @ layer.weights.T + layer.bias
        preacts.append(z)
        x = _apply_activation(z, act)
    return x, ForwardCache(net=net, dropped_input=dropped, inputs=inputs, preacts=preacts)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Squared error summed over dims, averaged over the batch."""
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.sum(np.square(diff), dtype=np.float64) / pred.shape[0])


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of mse_loss with respect to pred."""
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    return 2.0 * (pred - target) / pred.shape[0]


def backward(
    net: Network, cache: ForwardCache, loss_grad: np.ndarray
) -> tuple[list, np.ndarray]:
    """Exact gradients of a scalar loss wrt every parameter and the input.

    ``loss_grad`` is dL/d(output). Returns (grads, input_grad) where grads
    is a list of (dW, db) aligned with net.layers; input_grad is wrt the
    post-dropout input.
    """
    if cache.net is not net:
        raise StateError("cache was produced by a different network")
    if loss_grad.shape != (cache.inputs[0].shape[0], net.output_dim):
        raise ShapeError(
            f"loss grad shape {loss_grad.shape} does not match output "
            f"({cache.inputs[0].shape[0]}, {net.output_dim})"
        )
    d = loss_grad
    grads: list = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        layer, act = net.layers[k]
        if act == "relu":
            d = d * (cache.preacts[k] > 0)
        dw = d.T @ cache.inputs[k]
        db = d.sum(axis=0)
        grads[k] = (dw, db)
        d = d @ layer.weights
    return grads, d


@dataclass
class OptimizerState:
    learning_rate: float
    momentum: float
    velocities: list  # of (vW, vb) matching the network's layers

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ArgumentError(f"learning rate {self.learning_rate} is negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ArgumentError(f"momentum {self.momentum} not in [0, 1)")


def init_optimizer(net: Network, learning_rate: float, momentum: float) -> OptimizerState:
    vel = [
        (np.zeros_like(layer.weights), np.zeros_like(layer.bias))
        for layer, _ in net.layers
    ]
    return OptimizerState(learning_rate=learning_rate, momentum=momentum, velocities=vel)


def momentum_update(
    param: np.ndarray, grad: np.ndarray, velocity: np.ndarray, lr: float, momentum: float
) -> None:
    """Classical momentum, in place: v <- m*v - lr*g; p <- p + v."""
    if not np.isfinite(grad).all():
        raise DivergenceError("non-finite gradient")
    velocity *= momentum
    velocity -= lr * grad
    param += velocity


def sgd_step(net: Network, grads: list, opt: OptimizerState) -> None:
    """Apply one momentum-SGD step to every layer. Mutates net and opt."""
    if len(grads) != len(net.layers):
        raise ShapeError("gradient list does not match layer count")
    for (layer, _), (dw, db), (vw, vb) in zip(net.layers, grads, opt.velocities):
        momentum_update(layer.weights, dw, vw, opt.learning_rate, opt.momentum)
        momentum_update(layer.bias, db, vb, opt.learning_rate, opt.momentum)


def cast_network(net: Network, dtype) -> Network:
    """Deep copy with all parameters cast to ``dtype``."""
    layers = [
        (LinearLayer(weights=layer.weights.astype(dtype), bias=layer.bias.astype(dtype)), act)
        for layer, act in net.layers
    ]
    return Network(layers=layers)


def parameter_arrays(net: Network) -> list[np.ndarray]:
    out = []
    for layer, _ in net.layers:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def finite_difference_errors(
    params: list[np.ndarray],
    eval_loss,
    analytic: list[np.ndarray],
    epsilon: float = 1e-4,
) -> float:
    """Max relative error between central differences and analytic grads.

    ``params`` are mutated in place around each probe and restored;
    arithmetic should run in float64 for the stated 1e-4 bound to hold.
    """
    if epsilon <= 0:
        raise ArgumentError("epsilon must be positive")
    worst = 0.0
    for param, grad in zip(params, analytic):
        flat_p = param.reshape(-1)
        flat_g = grad.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + epsilon
            lo_hi = eval_loss()
            flat_p[i] = orig - epsilon
            lo_lo = eval_loss()
            flat_p[i] = orig
            fd = (lo_hi - lo_lo) / (2.0 * epsilon)
            bp = float(flat_g[i])
            denom = max(abs(fd), abs(bp), 1e-8)
            worst = max(worst, abs(fd - bp) / denom)
    return worst


def grad_check(net: Network, batch: np.ndarray, loss, epsilon: float = 1e-4) -> float:
    """Compare backprop gradients against central finite differences.

    ``loss`` maps (net, batch) to ``(scalar, grads)`` where grads matches
    the layout returned by :func:`backward`. The check runs on a float64
    copy of the network; intended for small nets only.
    """
    net64 = cast_network(net, np.float64)
    batch64 = batch.astype(np.float64)
    _, analytic = loss(net64, batch64)
    flat_grads = []
    for dw, db in analytic:
        flat_grads.append(np.asarray(dw, dtype=np.float64))
        flat_grads.append(np.asarray(db, dtype=np.float64))
    params = parameter_arrays(net64)

    def eval_loss() -> float:
        return float(loss(net64, batch64)[0])

    return finite_difference_errors(params, eval_loss, flat_grads, epsilon)
