import logging

import numpy as np
import pytest

from tcwm.core.errors import DimensionError, NumericError
from tcwm.numerics import AdamState, AffineLayer, MlpNet, adam_step, backprop, grad_check, require_finite
from tcwm.utils.seeding import derive_rng


def test_affine_applies_over_leading_axes():
    layer = AffineLayer.init(3, 2, derive_rng(0, "t"), dtype=np.float64)
    x = np.ones((4, 5, 3))
    out = layer(x)
    assert out.shape == (4, 5, 2)
    np.testing.assert_allclose(out[1, 2], layer.weight @ np.ones(3) + layer.bias)


def test_affine_rejects_wrong_input_width():
    layer = AffineLayer.init(3, 2, derive_rng(0, "t"))
    with pytest.raises(DimensionError, match="expected shape"):
        layer(np.ones((4, 5)))


def test_mlp_rejects_broken_chain():
    rng = derive_rng(0, "t")
    with pytest.raises(DimensionError):
        MlpNet(layers=[AffineLayer.init(3, 4, rng), AffineLayer.init(5, 2, rng)])


def test_mlp_backprop_matches_finite_differences():
    rng = derive_rng(1, "mlp")
    net = MlpNet.init([3, 6, 6, 2], rng, dtype=np.float64)
    x = rng.standard_normal((7, 3))
    probe = rng.standard_normal((7, 2))
    params = net.named_parameters()

    def loss_fn():
        out = net(x)
        grads, _ = backprop(net, x, probe)
        return float(np.sum(out * probe)), grads

    assert grad_check(loss_fn, params, h=1e-6, tol=1e-6) < 1e-6


def test_backprop_input_gradient():
    rng = derive_rng(2, "mlp")
    net = MlpNet.init([3, 5, 1], rng, dtype=np.float64)
    x = rng.standard_normal((1, 3))
    _, dx = backprop(net, x, np.ones((1, 1)))
    h = 1e-6
    fd = np.array([(net(x + h * e) - net(x - h * e))[0, 0] / (2 * h) for e in np.eye(3)[:, None, :]])
    np.testing.assert_allclose(dx[0], fd, rtol=1e-6, atol=1e-8)


def test_grad_check_flags_wrong_gradient(caplog):
    w = np.array([1.0, -2.0, 0.5])

    def loss_fn():
        return float(np.sum(w**2)), {"w": 3.0 * w}

    with caplog.at_level(logging.WARNING, logger="tcwm.numerics.gradcheck"):
        err = grad_check(loss_fn, {"w": w}, h=1e-5, tol=1e-4)
    assert err > 0.1
    assert "gradient check failed" in caplog.text
    np.testing.assert_array_equal(w, [1.0, -2.0, 0.5])


def test_grad_check_subsamples_entries():
    w = np.linspace(-1.0, 1.0, 50)

    def loss_fn():
        return float(np.sum(np.sin(w))), {"w": np.cos(w)}

    assert grad_check(loss_fn, {"w": w}, h=1e-6, max_entries=5, rng=derive_rng(0, "gc")) < 1e-6


def test_adam_first_step_moves_by_learning_rate():
    p = {"w": np.array([1.0, 1.0, 1.0])}
    g = {"w": np.array([0.5, -2.0, 0.0])}
    state = AdamState.for_params(p, lr=0.01)
    adam_step(state, p, g)
    np.testing.assert_allclose(p["w"], [0.99, 1.01, 1.0], atol=1e-7)
    assert state.step == 1


def test_adam_converges_on_a_quadratic():
    p = {"w": np.array([0.0])}
    state = AdamState.for_params(p, lr=0.05)
    for _ in range(200):
        adam_step(state, p, {"w": 2.0 * (p["w"] - 2.0)})
    assert abs(p["w"][0] - 2.0) < 0.05


def test_adam_leaves_zero_gradient_entries_untouched():
    p = {"w": np.array([1.0, 2.0])}
    state = AdamState.for_params(p, lr=0.1)
    adam_step(state, p, {"w": np.array([1.0, 0.0])})
    adam_step(state, p, {"w": np.array([0.0, 0.0])})
    assert p["w"][1] == 2.0


def test_adam_rejects_non_finite_gradient_before_mutating():
    p = {"a": np.array([1.0]), "b": np.array([1.0])}
    state = AdamState.for_params(p)
    with pytest.raises(NumericError, match="'b'"):
        adam_step(state, p, {"a": np.array([1.0]), "b": np.array([np.nan])})
    assert p["a"][0] == 1.0
    assert state.step == 0


def test_adam_rejects_shape_mismatch():
    p = {"w": np.zeros(3)}
    with pytest.raises(DimensionError):
        adam_step(AdamState.for_params(p), p, {"w": np.zeros(2)})


def test_require_finite():
    require_finite("ok", np.ones(3))
    with pytest.raises(NumericError, match="bad"):
        require_finite("bad", np.array([1.0, np.inf]))


def test_derive_rng_streams_are_reproducible_and_distinct():
    a = derive_rng(7, "traj", 3).standard_normal(4)
    b = derive_rng(7, "traj", 3).standard_normal(4)
    c = derive_rng(7, "traj", 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_grad_check_on_tanh_sum():
    rng = derive_rng(5, "tanh")
    x = rng.standard_normal((10, 4))
    w = rng.standard_normal(4)

    def loss_fn():
        h = np.tanh(x @ w)
        return float(h.sum()), {"w": x.T @ (1.0 - h**2)}

    assert grad_check(loss_fn, {"w": w}, h=1e-3, tol=1e-4) <= 1e-4
