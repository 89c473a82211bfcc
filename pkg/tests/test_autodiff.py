"""Gradient checks for every registered primitive plus the optimizer."""

import numpy as np
import pytest

from hyperweno import autodiff as ad
from hyperweno.autodiff import (
    Adam,
    AdamState,
    Tape,
    Tensor,
    adam_step,
    backward,
    clip_gradients,
    finite_difference_gradient,
)

RNG = np.random.default_rng(1234)


def check_gradient(build, x0, rtol=1e-5, h=1e-6):
    """Compare reverse-mode gradients of ``build`` with central differences.

    ``build`` maps a Tensor (or ndarray for the oracle) to a scalar through
    the ops under test; the oracle path never touches the tape.
    """
    leaf = Tensor(np.array(x0, dtype=np.float64), requires_grad=True)
    out = build(leaf)
    backward(out)

    def scalar(x):
        return float(ad.value_of(build(Tensor(x))))

    g_fd = finite_difference_gradient(scalar, np.array(x0, dtype=np.float64), h=h)
    scale = np.maximum(np.maximum(np.abs(g_fd), np.abs(leaf.grad)), 1e-6)
    assert np.max(np.abs(leaf.grad - g_fd) / scale) < rtol


# ---------------------------------------------------------------------------
# trivial identities


def test_product_rule_scalar():
    x = Tensor(np.array(3.0), requires_grad=True)
    backward(x * x)
    assert x.grad == pytest.approx(6.0)


def test_tanh_gradient_at_zero():
    x = Tensor(np.array(0.0), requires_grad=True)
    backward(ad.tanh(x))
    assert x.grad == pytest.approx(1.0)


def test_reduce_sum_gradient_is_ones():
    x = Tensor(RNG.standard_normal((4, 3)), requires_grad=True)
    backward(ad.reduce_sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((4, 3)))


def test_independent_leaf_gets_zero_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = Tensor(np.array([3.0, 4.0]), requires_grad=True)
    backward(ad.reduce_sum(x * x))
    assert y.grad is None


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        backward(x * 2.0)


# ---------------------------------------------------------------------------
# universal primitive gradient check

UNARY_CASES = [
    ("tanh", lambda t: ad.reduce_sum(ad.tanh(t)), RNG.standard_normal((5, 2))),
    ("exp", lambda t: ad.reduce_sum(ad.exp(t)), 0.3 * RNG.standard_normal((4, 3))),
    ("sqrt", lambda t: ad.reduce_sum(ad.sqrt(t)), 1.0 + RNG.random((6,))),
    ("square", lambda t: ad.reduce_sum(ad.square(t)), RNG.standard_normal((7,))),
    ("reciprocal", lambda t: ad.reduce_sum(ad.reciprocal(t)), 2.0 + RNG.random((5,))),
    ("abs", lambda t: ad.reduce_sum(ad.absolute(t)), 1.0 + RNG.random((4, 2))),
    ("neg", lambda t: ad.reduce_sum(-(t * 3.0)), RNG.standard_normal((3, 3))),
    ("mean", lambda t: ad.reduce_mean(ad.square(t)), RNG.standard_normal((4, 5))),
    ("slice", lambda t: ad.reduce_sum(ad.square(t[1:4])), RNG.standard_normal((6, 2))),
    ("reshape", lambda t: ad.reduce_sum(ad.square(ad.reshape(t, (6,)))), RNG.standard_normal((2, 3))),
    (
        "softmax",
        lambda t: ad.reduce_sum(ad.square(ad.softmax_rows(t))),
        RNG.standard_normal((4, 3)),
    ),
    (
        "sum_axis",
        lambda t: ad.reduce_sum(ad.square(ad.reduce_sum(t, axis=0))),
        RNG.standard_normal((4, 3)),
    ),
]


@pytest.mark.parametrize("name,build,x0", UNARY_CASES, ids=[c[0] for c in UNARY_CASES])
def test_unary_primitive_gradients(name, build, x0):
    check_gradient(build, x0)


BINARY_CASES = [
    ("add", lambda a, b: ad.reduce_sum(ad.square(a + b))),
    ("sub", lambda a, b: ad.reduce_sum(ad.square(a - b))),
    ("mul", lambda a, b: ad.reduce_sum(ad.square(a * b))),
    ("div", lambda a, b: ad.reduce_sum(ad.square(a / (b + 3.0)))),
    ("max", lambda a, b: ad.reduce_sum(ad.square(ad.maximum(a, b)))),
]


@pytest.mark.parametrize("name,build", BINARY_CASES, ids=[c[0] for c in BINARY_CASES])
@pytest.mark.parametrize("side", ["left", "right"])
def test_binary_primitive_gradients(name, build, side):
    # bounded draws keep the shifted denominator of the div case away from 0
    a0 = RNG.uniform(-1.0, 1.0, (5, 3))
    b0 = RNG.uniform(-1.0, 1.0, (5, 3)) + 0.1  # keep away from max ties
    other = Tensor(b0 if side == "left" else a0)
    if side == "left":
        check_gradient(lambda t: build(t, other), a0)
    else:
        check_gradient(lambda t: build(other, t), b0)


def test_broadcast_gradients():
    a0 = RNG.standard_normal((6, 1))
    b = Tensor(RNG.standard_normal((6, 4)))
    check_gradient(lambda t: ad.reduce_sum(ad.square(t * b + t)), a0)


def test_concat_gradient():
    x0 = RNG.standard_normal((5, 2))

    def build(t):
        return ad.reduce_sum(ad.square(ad.concat([t[3:], t, t[:1]], axis=0)))

    check_gradient(build, x0)


# ---------------------------------------------------------------------------
# convolutions


def test_conv1d_identity_kernel():
    x = RNG.standard_normal((7, 3))
    w = np.zeros((1, 3, 3))
    w[0] = np.eye(3)
    out = ad.conv1d(x, w, np.zeros(3), "circular")
    np.testing.assert_allclose(out, x)


def test_conv1d_hand_average_circular():
    # K=3 averaging kernel on circular-padded (1,2,3,4)
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    w = np.full((3, 1, 1), 1.0 / 3.0)
    out = ad.conv1d(x, w, np.zeros(1), "circular")
    np.testing.assert_allclose(out.ravel(), [7.0 / 3.0, 2.0, 3.0, 8.0 / 3.0])


def test_conv1d_rejects_even_kernel():
    with pytest.raises(ValueError):
        ad.conv1d(np.ones((4, 1)), np.ones((2, 1, 1)), np.zeros(1), "circular")


@pytest.mark.parametrize("padding", ["circular", "replicate"])
@pytest.mark.parametrize("wrt", ["input", "kernel", "bias"])
def test_conv1d_gradients_match_fd(padding, wrt):
    x0 = RNG.standard_normal((16, 2))
    w0 = RNG.standard_normal((5, 2, 3))
    b0 = RNG.standard_normal(3)
    proj = RNG.standard_normal((16, 3))  # random scalarization

    def with_x(t):
        return ad.reduce_sum(ad.conv1d(t, w0, b0, padding) * proj)

    def with_w(t):
        return ad.reduce_sum(ad.conv1d(x0, t, b0, padding) * proj)

    def with_b(t):
        return ad.reduce_sum(ad.conv1d(x0, w0, t, padding) * proj)

    build, arg = {"input": (with_x, x0), "kernel": (with_w, w0), "bias": (with_b, b0)}[wrt]
    check_gradient(build, arg)


def test_conv1d_local_shared_kernel_matches_conv1d():
    x = RNG.standard_normal((10, 2))
    w = RNG.standard_normal((5, 2, 4))
    b = RNG.standard_normal(4)
    shared = ad.conv1d(x, w, b, "replicate")
    w_local = np.broadcast_to(w[None], (10, 5, 2, 4)).copy()
    b_local = np.broadcast_to(b[None], (10, 4)).copy()
    local = ad.conv1d_local(x, w_local, b_local, "replicate")
    np.testing.assert_array_equal(shared, local)


def test_conv1d_local_zeroed_position_returns_bias():
    x = RNG.standard_normal((8, 1))
    w = RNG.standard_normal((8, 5, 1, 4))
    b = RNG.standard_normal((8, 4))
    w[3] = 0.0
    out = ad.conv1d_local(x, w, b, "circular")
    np.testing.assert_allclose(out[3], b[3])


@pytest.mark.parametrize("padding", ["circular", "replicate"])
@pytest.mark.parametrize("wrt", ["input", "kernel"])
def test_conv1d_local_gradients_match_fd(padding, wrt):
    x0 = RNG.standard_normal((12, 1))
    w0 = RNG.standard_normal((12, 5, 1, 4))
    b0 = RNG.standard_normal((12, 4))
    proj = RNG.standard_normal((12, 4))

    def with_x(t):
        return ad.reduce_sum(ad.conv1d_local(t, w0, b0, padding) * proj)

    def with_w(t):
        return ad.reduce_sum(ad.conv1d_local(x0, t, b0, padding) * proj)

    build, arg = {"input": (with_x, x0), "kernel": (with_w, w0)}[wrt]
    check_gradient(build, arg)


# ---------------------------------------------------------------------------
# softmax values


def test_softmax_uniform_logits():
    out = ad.softmax_rows(np.zeros((2, 3)))
    np.testing.assert_allclose(out, np.full((2, 3), 1.0 / 3.0))


def test_softmax_hand_values():
    out = ad.softmax_rows(np.log(np.array([[1.0, 2.0, 1.0]])))
    np.testing.assert_allclose(out, [[0.25, 0.5, 0.25]], atol=1e-15)


def test_softmax_shift_invariance():
    z = RNG.standard_normal((6, 3))
    np.testing.assert_allclose(
        ad.softmax_rows(z + 7.3), ad.softmax_rows(z), atol=1e-14
    )


# ---------------------------------------------------------------------------
# determinism and tape lifetime


def test_backward_is_bitwise_deterministic():
    x0 = RNG.standard_normal((8, 2))
    grads = []
    for _ in range(2):
        x = Tensor(x0.copy(), requires_grad=True)
        y = ad.reduce_sum(ad.square(ad.tanh(ad.conv1d(x, np.ones((3, 2, 2)), np.zeros(2), "circular"))))
        backward(y)
        grads.append(x.grad.copy())
    np.testing.assert_array_equal(grads[0], grads[1])


def test_tape_clears_to_zero_length():
    x = Tensor(np.ones((4, 1)), requires_grad=True)
    with Tape() as tape:
        loss = ad.reduce_sum(ad.square(x * 2.0))
        assert len(tape) > 0
        backward(loss)
        tape.clear()
        assert len(tape) == 0


# ---------------------------------------------------------------------------
# optimizer


def test_adam_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.0, -2.0])}
    state = AdamState()
    out = adam_step(params, {"w": np.zeros(2)}, state)
    np.testing.assert_array_equal(out["w"], params["w"])


def test_adam_first_step_magnitude_is_lr():
    # bias-corrected first step: update = lr * g / (|g| + eps) ~ lr * sign(g)
    for g in (1e-4, 1.0, 1e4):
        params = {"w": np.array([0.0])}
        out = adam_step(params, {"w": np.array([g])}, AdamState(), lr=1e-3)
        assert abs(out["w"][0] + 1e-3) < 1e-6


def test_adam_descends_quadratic_bowl():
    # step small enough that no coordinate converges and starts oscillating
    target = np.array([1.0, -3.0, 2.0])
    leaf = Tensor(np.zeros(3), requires_grad=True)
    opt = Adam({"w": leaf}, lr=0.005)
    losses = []
    for _ in range(100):
        opt.zero_grad()
        loss = ad.reduce_sum(ad.square(leaf - target))
        backward(loss)
        losses.append(float(loss.value))
        opt.step()
    assert losses[-1] < losses[0] * 0.8
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_adam_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(3)}, {"w": np.zeros(2)}, AdamState())


def test_clip_gradients_scales_to_max_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    clipped = clip_gradients(grads, 1.0)
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in clipped.values()))
    assert norm == pytest.approx(1.0)
    untouched = clip_gradients({"a": np.array([0.1])}, 1.0)
    np.testing.assert_array_equal(untouched["a"], [0.1])
