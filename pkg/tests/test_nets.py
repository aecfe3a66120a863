from __future__ import annotations

import numpy as np
import pytest

from mmsurv.errors import ConfigError, NumericalError
from mmsurv.nets import (SELU_ALPHA, SELU_LAMBDA, DenseNet, GradientSet, Layer,
                         OptimizerState, activate, finite_diff_grad, init_net,
                         load_net, net_from_dict, net_to_dict, optimizer_step,
                         save_net)


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(numeric).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)


def test_init_shapes_and_zero_biases():
    net = init_net((4, 3, 1), "relu", seed=0, output_activation="identity")
    assert net.dims == (4, 3, 1)
    assert net.layers[0].w.shape == (3, 4)
    assert net.layers[1].w.shape == (1, 3)
    assert np.all(net.layers[0].b == 0.0) and np.all(net.layers[1].b == 0.0)
    assert net.param_count() == 3 * 4 + 3 + 1 * 3 + 1


def test_init_deterministic_given_seed():
    a = init_net((6, 5, 2), "tanh", seed=123)
    b = init_net((6, 5, 2), "tanh", seed=123)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.w, lb.w)


def test_selu_init_variance_close_to_reciprocal_fan_in():
    net = init_net((32, 128), "selu", seed=5)
    var = net.layers[0].w.var()
    assert abs(var - 1.0 / 32) < 0.2 * (1.0 / 32)


def test_relu_init_variance_close_to_two_over_fan_in():
    net = init_net((64, 256), "relu", seed=9)
    var = net.layers[0].w.var()
    assert abs(var - 2.0 / 64) < 0.2 * (2.0 / 64)


def test_forward_identity_net_reproduces_affine_map():
    w = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([0.5, -0.5])
    net = DenseNet([Layer(w.copy(), b.copy(), "identity")])
    y, _ = net.forward(np.array([1.0, 1.0]))
    assert np.allclose(y, w @ np.ones(2) + b, atol=0, rtol=0)


def test_selu_matches_published_constants():
    z = np.array([-40.0, 0.0, 2.0])
    y = activate("selu", z)
    assert y[1] == 0.0
    assert y[2] == SELU_LAMBDA * 2.0
    # deep negative tail saturates at -lambda*alpha
    assert abs(y[0] - (-1.758099340847377)) < 1e-12
    assert round(-SELU_LAMBDA * SELU_ALPHA, 4) == -1.7581


def test_forward_rejects_wrong_width_and_nonfinite():
    net = init_net((3, 2), "relu", seed=0)
    with pytest.raises(ConfigError):
        net.forward(np.ones(4))
    with pytest.raises(NumericalError):
        net.forward(np.array([1.0, np.nan, 0.0]))


def test_backward_zero_upstream_gives_zero_gradients():
    net = init_net((5, 4, 2), "selu", seed=1)
    _, tape = net.forward(np.random.default_rng(0).normal(size=5))
    grads, dx = net.backward(tape, np.zeros(2))
    assert np.all(grads.flat() == 0.0)
    assert np.all(dx == 0.0)


def test_backward_single_linear_layer_input_grad_is_w_transpose():
    rng = np.random.default_rng(2)
    w = rng.normal(size=(3, 4))
    net = DenseNet([Layer(w.copy(), np.zeros(3), "identity")])
    _, tape = net.forward(rng.normal(size=4))
    upstream = rng.normal(size=3)
    _, dx = net.backward(tape, upstream)
    assert np.allclose(dx, w.T @ upstream, atol=1e-15)


@pytest.mark.parametrize("activation", ["relu", "selu", "tanh", "identity"])
def test_backward_matches_finite_differences(activation):
    rng = np.random.default_rng(hash(activation) % 2**32)
    for _ in range(5):
        net = init_net((8, 16, 8, 1), activation, seed=rng.integers(2**31),
                       output_activation="identity")
        x = rng.normal(size=8)
        upstream = rng.normal(size=1)

        def loss(p, net=net, x=x, upstream=upstream):
            probe = net.copy()
            probe.set_flat_params(p)
            y, _ = probe.forward(x)
            return float(upstream @ y)

        _, tape = net.forward(x)
        grads, _ = net.backward(tape, upstream)
        numeric = finite_diff_grad(loss, net.flat_params(), h=1e-5)
        assert rel_err(grads.flat(), numeric) < 1e-4


def test_backward_input_grad_matches_finite_differences():
    rng = np.random.default_rng(77)
    net = init_net((6, 10, 3), "tanh", seed=3)
    x = rng.normal(size=6)
    upstream = rng.normal(size=3)
    _, tape = net.forward(x)
    _, dx = net.backward(tape, upstream)

    def loss(xv):
        y, _ = net.forward(xv)
        return float(upstream @ y)

    numeric = finite_diff_grad(loss, x, h=1e-5)
    assert rel_err(dx, numeric) < 1e-4


def test_finite_diff_on_quadratic():
    g = finite_diff_grad(lambda p: float((p ** 2).sum()), np.array([1.0, -2.0, 3.0]))
    assert np.allclose(g, [2.0, -4.0, 6.0], atol=1e-8)


def test_selu_stack_keeps_activations_normalized():
    # four selu layers, standard-normal input: mean near 0, variance near 1
    net = init_net((32, 32, 32, 32, 32), "selu", seed=28)
    rng = np.random.default_rng(12)
    outs = np.stack([net.forward(rng.normal(size=32))[0] for _ in range(10_000)])
    mean = outs.mean(axis=0)
    var = outs.var(axis=0)
    assert np.all(np.abs(mean) < 0.3)
    assert np.all((var > 0.5) & (var < 2.0))


def test_sgd_step_is_plain_descent():
    net = DenseNet([Layer(np.array([[1.0]]), np.array([0.0]), "identity")])
    grads = GradientSet([np.array([[2.0]])], [np.array([0.0])])
    state = OptimizerState("sgd", lr=0.1, net=net)
    optimizer_step(net, grads, state)
    assert net.layers[0].w[0, 0] == pytest.approx(0.8, abs=0)


@pytest.mark.parametrize("magnitude", [1e-3, 1.0, 1e3])
def test_adam_first_step_size_is_learning_rate(magnitude):
    net = DenseNet([Layer(np.array([[0.0]]), np.array([0.0]), "identity")])
    grads = GradientSet([np.array([[magnitude]])], [np.array([0.0])])
    state = OptimizerState("adam", lr=0.01, net=net)
    optimizer_step(net, grads, state)
    assert abs(net.layers[0].w[0, 0] + 0.01) < 1e-5 * 0.01 + 1e-12


def test_adam_zero_gradient_leaves_parameters_unchanged():
    net = init_net((3, 2), "relu", seed=4)
    before = net.flat_params()
    state = OptimizerState("adam", lr=0.05, net=net)
    optimizer_step(net, GradientSet.zeros_like(net), state)
    assert np.array_equal(net.flat_params(), before)


def test_nonfinite_gradient_refuses_step():
    net = init_net((3, 2), "relu", seed=4)
    before = net.flat_params()
    grads = GradientSet.zeros_like(net)
    grads.dw[0][0, 0] = np.nan
    state = OptimizerState("adam", lr=0.05, net=net)
    with pytest.raises(NumericalError):
        optimizer_step(net, grads, state)
    assert np.array_equal(net.flat_params(), before)


def test_gradient_shape_mismatch_rejected():
    net = init_net((3, 2), "relu", seed=4)
    other = init_net((4, 2), "relu", seed=4)
    state = OptimizerState("sgd", lr=0.1, net=net)
    with pytest.raises(ConfigError):
        optimizer_step(net, GradientSet.zeros_like(other), state)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    net = init_net((7, 5, 3, 1), "selu", seed=21, output_activation="identity")
    path = tmp_path / "net.json"
    save_net(net, str(path))
    loaded = load_net(str(path))
    assert loaded.dims == net.dims
    for la, lb in zip(net.layers, loaded.layers):
        assert la.activation == lb.activation
        assert np.array_equal(la.w, lb.w) and la.w.dtype == lb.w.dtype
        assert np.array_equal(la.b, lb.b)


def test_checkpoint_dict_rejects_foreign_payload():
    from mmsurv.errors import DataError
    with pytest.raises(DataError):
        net_from_dict({"format": "something-else"})


def test_net_dict_round_trip_without_file():
    net = init_net((4, 4), "tanh", seed=8)
    clone = net_from_dict(net_to_dict(net))
    assert np.array_equal(net.layers[0].w, clone.layers[0].w)
