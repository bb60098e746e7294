import numpy as np
import pytest

from gridtalk.agent import network_spec
from gridtalk.neural import (
    AdamState,
    CheckpointError,
    Conv1D,
    Dense,
    LSTM,
    MaxPool1D,
    NetworkSpec,
    NonFiniteGradientError,
    QNetwork,
    ShapeError,
    adam_step,
    clip_global_norm,
    finite_difference_gradients,
    gradient_check,
    load_params,
    max_relative_error,
    q_regression_loss,
    save_params,
)

from helpers import naive_lstm_forward, set_constant_q


def _rng():
    return np.random.default_rng(777)


def _layer_fd_check(layer, x, extra_forward=None, h=1e-5):
    """Finite-difference check of one layer through a scalar sum-loss."""
    forward = extra_forward or (lambda: layer.forward(x)[0])

    def loss_fn():
        return float(np.sum(forward()))

    out = forward()
    dy = np.ones_like(out)
    if isinstance(layer, LSTM):
        _, grads = layer.backward(dy, layer.forward(x[0], x[1])[1])
    else:
        _, grads = layer.backward(dy, layer.forward(x)[1])
    numeric = finite_difference_gradients(loss_fn, layer.params(), h=h)
    return max_relative_error(grads, numeric)


def test_dense_identity_weight_passes_input_through():
    layer = Dense(2, 2, "linear", _rng(), np.float64)
    layer.W[...] = np.eye(2)
    layer.b[...] = 0.0
    x = np.array([[1.5, -2.0]])
    y, _ = layer.forward(x)
    assert np.array_equal(y, x)


def test_dense_gradient_closed_form():
    layer = Dense(3, 2, "linear", _rng(), np.float64)
    x = _rng().normal(size=(4, 3))
    _, cache = layer.forward(x)
    dy = _rng().normal(size=(4, 2))
    dx, grads = layer.backward(dy, cache)
    assert np.allclose(grads["W"], x.T @ dy)
    assert np.allclose(grads["b"], dy.sum(axis=0))
    assert np.allclose(dx, dy @ layer.W.T)


def test_dense_finite_difference():
    layer = Dense(4, 3, "relu", _rng(), np.float64)
    x = _rng().normal(size=(5, 4))
    assert _layer_fd_check(layer, x) < 1e-4


def test_conv_finite_difference():
    layer = Conv1D(3, 4, 3, _rng(), np.float64)
    x = _rng().normal(size=(2, 7, 3))
    assert _layer_fd_check(layer, x) < 1e-4


def test_maxpool_routes_gradient_to_argmax():
    pool = MaxPool1D(2)
    x = np.array([[[1.0], [3.0], [2.0], [0.5], [9.0]]])  # remainder dropped
    y, cache = pool.forward(x)
    assert y.tolist() == [[[3.0], [2.0]]]
    dx = pool.backward(np.array([[[1.0], [1.0]]]), cache)
    assert dx.tolist() == [[[0.0], [1.0], [1.0], [0.0], [0.0]]]


def test_lstm_finite_difference_with_lengths():
    layer = LSTM(3, 4, _rng(), np.float64)
    x = _rng().normal(size=(3, 5, 3))
    lengths = np.array([5, 2, 0])

    def loss_fn():
        return float(np.sum(layer.forward(x, lengths)[0]))

    h_out, cache = layer.forward(x, lengths)
    _, grads = layer.backward(np.ones_like(h_out), cache)
    numeric = finite_difference_gradients(loss_fn, layer.params(), h=1e-5)
    assert max_relative_error(grads, numeric) < 1e-4
    # zero-length sample contributes nothing
    assert np.array_equal(h_out[2], np.zeros(4))


def test_lstm_single_step_closed_form():
    """Sequence length 1 reduces to the hand-derived one-step gradient."""
    H, D = 3, 2
    layer = LSTM(D, H, _rng(), np.float64)
    x = _rng().normal(size=(1, 1, D))
    lengths = np.array([1])
    h_out, cache = layer.forward(x, lengths)
    dh = _rng().normal(size=(1, H))
    _, grads = layer.backward(dh, cache)

    def sig(z):
        return 1.0 / (1.0 + np.exp(-z))

    # forward recomputation: h0 = c0 = 0, so c = i*g, h = o*tanh(c)
    z = x[0, 0] @ layer.Wx + layer.b
    i, f, g, o = sig(z[:H]), sig(z[H : 2 * H]), np.tanh(z[2 * H : 3 * H]), sig(z[3 * H :])
    c = i * g
    tc = np.tanh(c)
    assert np.allclose(h_out[0], o * tc)
    d = dh[0]
    do = d * tc
    dc = d * o * (1 - tc**2)
    dz = np.concatenate([
        dc * g * i * (1 - i),
        np.zeros(H),  # forget gate sees c_prev = 0
        dc * i * (1 - g**2),
        do * o * (1 - o),
    ])
    assert np.allclose(grads["b"], dz)
    assert np.allclose(grads["Wx"], np.outer(x[0, 0], dz))
    assert np.allclose(grads["Wh"], np.zeros((H, 4 * H)))  # h_prev = 0


def test_zero_network_outputs_zero():
    net = QNetwork(network_spec("lstm"), seed=1)
    for arr in net.params().values():
        arr[...] = 0.0
    x = np.zeros((2, 3, 19))
    q, _ = net.forward(x, np.array([3, 1]), np.zeros((2, 31)))
    assert np.array_equal(q, np.zeros((2, 9)))


def test_forward_matches_naive_reimplementation():
    net = QNetwork(network_spec("lstm"), seed=42)
    rng = _rng()
    seq = rng.normal(size=(6, 19))
    aux = rng.normal(size=31)
    x = seq[None, :, :]
    q, _ = net.forward(x, np.array([6]), aux[None, :])
    expected = naive_lstm_forward(net, seq, aux)
    assert np.max(np.abs(q[0] - expected)) < 1e-10


def test_forward_shape_errors():
    net = QNetwork(network_spec("dnn"), seed=0)
    with pytest.raises(ShapeError):
        net.forward(np.zeros((1, 7, 19)), np.array([2]), np.zeros((1, 31)))
    with pytest.raises(ShapeError):
        net.forward(np.zeros((1, 30, 19)), np.array([2]), np.zeros((1, 30)))


@pytest.mark.parametrize("arch,turn_limit", [("lstm", 30), ("dnn", 12), ("cnn", 12)])
def test_network_gradient_check_small(arch, turn_limit):
    spec = network_spec(arch, turn_limit=turn_limit)
    net = QNetwork(spec, seed=3)
    rng = _rng()
    T = 4 if arch == "lstm" else turn_limit
    x = rng.normal(size=(2, T, 19))
    lengths = np.array([3, T])
    aux = rng.normal(size=(2, spec.aux_width))
    actions = np.array([1, 7])
    targets = rng.normal(size=2) * 5
    assert gradient_check(net, x, lengths, aux, actions, targets) < 1e-4


def test_q_loss_masks_untaken_actions():
    net = QNetwork(network_spec("lstm"), seed=2)
    x = _rng().normal(size=(2, 3, 19))
    lengths = np.array([3, 3])
    aux = _rng().normal(size=(2, 31))
    q, _ = net.forward(x, lengths, aux)
    actions = np.array([0, 4])
    targets = q[np.arange(2), actions].copy()  # loss must be exactly zero
    loss, grads, _ = q_regression_loss(net, x, lengths, aux, actions, targets)
    assert loss == 0.0
    assert all(np.allclose(g, 0) for g in grads.values())


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([1.0, -2.0])}
    before = params["w"].copy()
    adam_step(params, {"w": np.zeros(2)}, AdamState(lr=0.1))
    assert np.array_equal(params["w"], before)


def test_adam_first_step_is_signed_lr():
    params = {"w": np.array([1.0, 1.0, 1.0])}
    grads = {"w": np.array([0.5, -3.0, 0.0])}
    state = AdamState(lr=0.01)
    adam_step(params, grads, state)
    expected = np.array([1.0 - 0.01, 1.0 + 0.01, 1.0])
    assert np.allclose(params["w"], expected, atol=1e-6)


def test_adam_quadratic_convergence():
    params = {"w": np.array([0.0])}
    state = AdamState(lr=0.1)
    for _ in range(2000):
        grads = {"w": 2.0 * (params["w"] - 3.0)}
        adam_step(params, grads, state)
    assert abs(params["w"][0] - 3.0) < 0.01


def test_adam_rejects_non_finite():
    params = {"bad_block": np.ones(2)}
    with pytest.raises(NonFiniteGradientError, match="bad_block"):
        adam_step(params, {"bad_block": np.array([np.nan, 1.0])}, AdamState())


def test_clip_global_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    norm = clip_global_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    assert np.allclose(grads["a"], 0.6)
    assert np.allclose(grads["b"], 0.8)
    grads2 = {"a": np.array([0.3])}
    clip_global_norm(grads2, 1.0)
    assert np.allclose(grads2["a"], 0.3)  # under the cap: untouched


def test_checkpoint_round_trip(tmp_path):
    net = QNetwork(network_spec("lstm"), seed=5)
    adam = AdamState(lr=2e-4, step=17)
    adam.ensure(net.params())
    adam.m["enc.lstm.Wx"] += 0.25
    path = tmp_path / "net.ckpt"
    save_params(net, adam, path, episode=321, rng_state={"scene": {"x": 1}})
    loaded, loaded_adam, meta = load_params(path)
    for name, arr in net.params().items():
        assert np.array_equal(arr, loaded.params()[name])
    assert loaded_adam.step == 17 and loaded_adam.lr == 2e-4
    assert np.array_equal(loaded_adam.m["enc.lstm.Wx"], adam.m["enc.lstm.Wx"])
    assert meta["episode"] == 321
    assert meta["rng_state"] == {"scene": {"x": 1}}
    # forward of the reloaded net is identical
    x = _rng().normal(size=(1, 4, 19))
    q1, _ = net.forward(x, np.array([4]), np.zeros((1, 31)))
    q2, _ = loaded.forward(x, np.array([4]), np.zeros((1, 31)))
    assert np.array_equal(q1, q2)


def test_checkpoint_truncated(tmp_path):
    net = QNetwork(network_spec("dnn"), seed=5)
    path = tmp_path / "net.ckpt"
    save_params(net, AdamState(), path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CheckpointError, match="bytes"):
        load_params(path)


def test_checkpoint_spec_mismatch(tmp_path):
    net = QNetwork(network_spec("lstm"), seed=5)
    path = tmp_path / "net.ckpt"
    save_params(net, AdamState(), path)
    with pytest.raises(CheckpointError, match="does not match"):
        load_params(path, expect_spec=network_spec("cnn"))


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "net.ckpt"
    path.write_bytes(b"never a checkpoint")
    with pytest.raises(CheckpointError, match="magic"):
        load_params(path)


def test_f32_checkpoint_round_trip(tmp_path):
    net = QNetwork(network_spec("dnn", dtype="f32"), seed=8)
    path = tmp_path / "net32.ckpt"
    save_params(net, None, path)
    loaded, adam, _ = load_params(path)
    assert adam is None
    assert loaded.dtype == np.float32
    for name, arr in net.params().items():
        assert np.array_equal(arr, loaded.params()[name])


def test_spec_serialization_round_trip():
    spec = network_spec("cnn", turn_limit=20, dtype="f32")
    assert NetworkSpec.from_dict(spec.to_dict()) == spec


def test_constant_q_helper():
    net = QNetwork(network_spec("dnn"), seed=0)
    set_constant_q(net, [1, 2, 3, 4, 5, 6, 7, 8, 9])
    x = np.zeros((1, 30, 19))
    q, _ = net.forward(x, np.array([0]), np.ones((1, 31)))
    assert np.allclose(q[0], np.arange(1, 10))
