import numpy as np
import pytest

from sdec.errors import ArgumentError, DivergenceError, ShapeError, StateError
from sdec.net import (
    LinearLayer,
    Network,
    OptimizerState,
    RngState,
    backward,
    forward,
    grad_check,
    init_network,
    init_optimizer,
    mse_grad,
    mse_loss,
    sgd_step,
)


def identity_net(dim):
    layer = LinearLayer(weights=np.eye(dim, dtype=np.float32), bias=np.zeros(dim, dtype=np.float32))
    return Network(layers=[(layer, "identity")])


def mse_objective(target):
    """(net, batch) -> (loss, grads) closure usable with grad_check."""

    def loss(net, batch):
        out, cache = forward(net, batch)
        grads, _ = backward(net, cache, mse_grad(out, target.astype(batch.dtype)))
        return mse_loss(out, target.astype(batch.dtype)), grads

    return loss


class TestForward:
    def test_identity_layer_passthrough(self, rng):
        net = identity_net(4)
        batch = rng.standard_normal((3, 4)).astype(np.float32)
        out, _ = forward(net, batch)
        np.testing.assert_array_equal(out, batch)

    def test_rate_zero_is_noop(self, rng):
        net = init_network([4, 3], ["relu"], RngState(1))
        batch = rng.standard_normal((5, 4)).astype(np.float32)
        out_train, _ = forward(net, batch, dropout_rate=0.0, rng=RngState(2), training=True)
        out_eval, _ = forward(net, batch, dropout_rate=0.0, training=False)
        np.testing.assert_array_equal(out_train, out_eval)

    def test_seeded_dropout_is_reproducible(self, rng):
        net = init_network([6, 4], ["identity"], RngState(7))
        batch = rng.standard_normal((8, 6)).astype(np.float32)
        out1, _ = forward(net, batch, dropout_rate=0.4, rng=RngState(99), training=True)
        out2, _ = forward(net, batch, dropout_rate=0.4, rng=RngState(99), training=True)
        assert out1.tobytes() == out2.tobytes()

    def test_inverted_dropout_is_unbiased(self):
        x = np.full((1, 10), 2.0, dtype=np.float32)
        net = identity_net(10)
        rng = RngState(3)
        draws = 10_000
        rate = 0.3
        acc = np.zeros(10, dtype=np.float64)
        for _ in range(draws):
            out, _ = forward(net, x, dropout_rate=rate, rng=rng, training=True)
            acc += out[0]
        mean = acc / draws
        # per-entry variance of inverted dropout: x^2 * rate/(1-rate)
        se = np.sqrt(4.0 * rate / (1 - rate) / draws)
        assert np.all(np.abs(mean - 2.0) < 3 * se + 1e-9)

    def test_width_mismatch(self, rng):
        net = identity_net(4)
        with pytest.raises(ShapeError):
            forward(net, rng.standard_normal((2, 5)).astype(np.float32))

    def test_dropout_needs_rng(self, rng):
        net = identity_net(2)
        with pytest.raises(ArgumentError):
            forward(net, np.zeros((1, 2), np.float32), dropout_rate=0.5, training=True)


class TestMseLoss:
    def test_zero_on_equal(self, rng):
        x = rng.standard_normal((4, 3)).astype(np.float32)
        assert mse_loss(x, x.copy()) == 0.0

    def test_single_row(self):
        assert mse_loss(np.float32([[0, 0]]), np.float32([[3, 4]])) == pytest.approx(25.0)

    def test_batch_average(self):
        pred = np.float32([[0, 0], [0, 0]])
        target = np.float32([[3, 4], [1, 0]])
        assert mse_loss(pred, target) == pytest.approx(13.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(np.zeros((1, 2), np.float32), np.zeros((2, 1), np.float32))


class TestBackward:
    def test_zero_loss_grad_gives_zero_grads(self, rng):
        net = init_network([5, 4, 3], ["relu", "identity"], RngState(0))
        batch = rng.standard_normal((6, 5)).astype(np.float32)
        out, cache = forward(net, batch)
        grads, dx = backward(net, cache, np.zeros_like(out))
        for dw, db in grads:
            assert not dw.any() and not db.any()
        assert not dx.any()

    def test_single_layer_closed_form(self, rng):
        net = init_network([4, 3], ["identity"], RngState(5))
        x = rng.standard_normal((7, 4)).astype(np.float32)
        t = rng.standard_normal((7, 3)).astype(np.float32)
        out, cache = forward(net, x)
        grads, _ = backward(net, cache, mse_grad(out, t))
        w = net.layers[0][0].weights
        b = net.layers[0][0].bias
        expected = 2.0 / len(x) * (x @ w.T + b - t).T @ x
        np.testing.assert_allclose(grads[0][0], expected, atol=1e-6)

    def test_foreign_cache_rejected(self, rng):
        net_a = init_network([3, 2], ["identity"], RngState(1))
        net_b = init_network([3, 2], ["identity"], RngState(2))
        batch = rng.standard_normal((2, 3)).astype(np.float32)
        out, cache = forward(net_a, batch)
        with pytest.raises(StateError):
            backward(net_b, cache, np.zeros_like(out))


class TestGradCheck:
    def test_small_net_passes(self, rng):
        net = init_network([5, 3, 5], ["identity", "identity"], RngState(11))
        batch = rng.standard_normal((4, 5)).astype(np.float32)
        err = grad_check(net, batch, mse_objective(batch), epsilon=1e-4)
        assert err < 1e-4

    def test_relu_net_passes(self, rng):
        net = init_network([6, 4, 6], ["relu", "identity"], RngState(13))
        batch = rng.standard_normal((5, 6)).astype(np.float32)
        err = grad_check(net, batch, mse_objective(batch), epsilon=1e-4)
        assert err < 1e-4

    def test_constant_loss_reports_zero(self, rng):
        net = init_network([3, 2], ["identity"], RngState(1))
        batch = rng.standard_normal((2, 3)).astype(np.float32)

        def const_loss(n, b):
            grads = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l, _ in n.layers]
            return 1.0, grads

        assert grad_check(net, batch, const_loss) == 0.0

    def test_detects_corrupted_backward(self, rng):
        net = init_network([4, 3], ["identity"], RngState(3))
        batch = rng.standard_normal((4, 4)).astype(np.float32)
        target = rng.standard_normal((4, 3)).astype(np.float32)

        def broken(n, b):
            out, cache = forward(n, b)
            grads, _ = backward(n, cache, mse_grad(out, target.astype(b.dtype)))
            grads = [(-dw, -db) for dw, db in grads]  # sign flip
            return mse_loss(out, target.astype(b.dtype)), grads

        err = grad_check(net, batch, broken, epsilon=1e-4)
        assert err == pytest.approx(2.0, abs=1e-2)


class TestSgdStep:
    def test_zero_momentum_is_plain_sgd(self):
        layer = LinearLayer(weights=np.float32([[1.0]]), bias=np.float32([0.0]))
        net = Network(layers=[(layer, "identity")])
        opt = init_optimizer(net, learning_rate=0.5, momentum=0.0)
        sgd_step(net, [(np.float32([[2.0]]), np.float32([0.0]))], opt)
        assert layer.weights[0, 0] == pytest.approx(0.0)

    def test_zero_gradient_leaves_params(self, rng):
        net = init_network([3, 2], ["identity"], RngState(0))
        before = net.layers[0][0].weights.copy()
        opt = init_optimizer(net, 0.1, 0.9)
        sgd_step(net, [(np.zeros((2, 3), np.float32), np.zeros(2, np.float32))], opt)
        np.testing.assert_array_equal(net.layers[0][0].weights, before)

    def test_classical_momentum_two_steps(self):
        layer = LinearLayer(weights=np.float32([[0.0]]), bias=np.float32([0.0]))
        net = Network(layers=[(layer, "identity")])
        opt = init_optimizer(net, learning_rate=0.1, momentum=0.9)
        g = [(np.float32([[1.0]]), np.float32([0.0]))]
        sgd_step(net, g, opt)
        assert layer.weights[0, 0] == pytest.approx(-0.1)
        sgd_step(net, g, opt)
        assert layer.weights[0, 0] == pytest.approx(-0.29)

    def test_non_finite_gradient_raises(self, rng):
        net = init_network([2, 2], ["identity"], RngState(0))
        opt = init_optimizer(net, 0.1, 0.0)
        bad = [(np.full((2, 2), np.inf, dtype=np.float32), np.zeros(2, np.float32))]
        with pytest.raises(DivergenceError):
            sgd_step(net, bad, opt)

    def test_optimizer_validation(self):
        with pytest.raises(ArgumentError):
            OptimizerState(learning_rate=0.1, momentum=1.0, velocities=[])
        with pytest.raises(ArgumentError):
            OptimizerState(learning_rate=-0.1, momentum=0.0, velocities=[])


class TestRngState:
    def test_same_seed_same_stream(self):
        a = RngState(42)
        b = RngState(42)
        assert a.uniform(-1, 1, 16).tobytes() == b.uniform(-1, 1, 16).tobytes()
        assert list(a.permutation(10)) == list(b.permutation(10))

    def test_init_network_deterministic(self):
        n1 = init_network([4, 3, 2], ["relu", "identity"], RngState(9))
        n2 = init_network([4, 3, 2], ["relu", "identity"], RngState(9))
        for (l1, _), (l2, _) in zip(n1.layers, n2.layers):
            assert l1.weights.tobytes() == l2.weights.tobytes()

    def test_init_bounds(self):
        net = init_network([16, 8], ["identity"], RngState(0))
        bound = 1.0 / np.sqrt(16)
        w = net.layers[0][0].weights
        assert np.all(np.abs(w) <= bound)
        assert not net.layers[0][0].bias.any()
