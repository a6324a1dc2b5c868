"""Networks: orthogonal init, flat-parameter views, GRU sequence mechanics,
and finite-difference verification of every backward pass."""
from __future__ import annotations

import numpy as np
import pytest

from memgap import ActorCritic, ContractError, NetConfig, RngStream, orthogonal


def _fd_grad(loss_fn, params: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    grad = np.zeros_like(params)
    for i in range(len(params)):
        bump = params.copy()
        bump[i] += eps
        up = loss_fn(bump)
        bump[i] -= 2 * eps
        down = loss_fn(bump)
        grad[i] = (up - down) / (2 * eps)
    return grad


def _generic_params(net: ActorCritic, seed: int) -> np.ndarray:
    """Dense random parameters for derivative checks.

    The real init leaves biases at exactly zero, which parks dead ReLU rows
    precisely on the activation kink where finite differences and the
    subgradient convention legitimately disagree; generic parameters keep
    every pre-activation away from the kink.
    """
    return 0.4 * RngStream(seed, 0xFD).normal(net.n_params)


def assert_grad_close(analytic: np.ndarray, fd: np.ndarray, rel_tol: float = 1e-4):
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(fd)))
    worst = float(np.max(np.abs(analytic - fd) / denom))
    assert worst <= rel_tol, f"worst relative gradient error {worst:.3e}"


# --- orthogonal init ----------------------------------------------------------------


def test_orthogonal_columns_and_rows():
    rng = RngStream(0, 0)
    tall = orthogonal(rng, 8, 5, gain=1.0)
    np.testing.assert_allclose(tall.T @ tall, np.eye(5), atol=1e-12)
    wide = orthogonal(rng, 3, 9, gain=1.0)
    np.testing.assert_allclose(wide @ wide.T, np.eye(3), atol=1e-12)
    gained = orthogonal(rng, 6, 6, gain=2.0)
    np.testing.assert_allclose(gained @ gained.T, 4.0 * np.eye(6), atol=1e-12)


def test_orthogonal_deterministic_per_stream():
    a = orthogonal(RngStream(3, 1), 5, 5, gain=1.0)
    b = orthogonal(RngStream(3, 1), 5, 5, gain=1.0)
    np.testing.assert_array_equal(a, b)
    c = orthogonal(RngStream(4, 1), 5, 5, gain=1.0)
    assert not np.array_equal(a, c)


def test_init_params_gain_policy():
    net = ActorCritic(NetConfig("gru", input_dim=6, action_dim=3, hidden_size=6, n_critics=2))
    params = net.init_params(RngStream(7, 0))
    p = net.views(params)
    h = 6
    for name, shape in net.spec:
        if len(shape) == 1:
            np.testing.assert_array_equal(p[name], np.zeros(shape))  # biases zero
    for block in range(3):  # GRU blocks orthogonal with gain 1
        for mat in (p["torso.Wx"], p["torso.Wh"]):
            W = mat[:, block * h : (block + 1) * h]
            np.testing.assert_allclose(W @ W.T, np.eye(h), atol=1e-12)
    np.testing.assert_allclose(p["torso.Win"] @ p["torso.Win"].T, 2.0 * np.eye(h), atol=1e-12)
    np.testing.assert_allclose(p["actor.W1"].T @ p["actor.W1"], 1e-4 * np.eye(3), atol=1e-12)
    for j in range(2):
        W1 = p[f"critic{j}.W1"]
        np.testing.assert_allclose(W1.T @ W1, np.eye(1), atol=1e-12)


def test_views_share_memory_and_validate():
    net = ActorCritic(NetConfig("mlp", input_dim=4, action_dim=2, hidden_size=5, n_critics=1))
    params = net.init_params(RngStream(1, 0))
    assert params.shape == (net.n_params,)
    p = net.views(params)
    total = sum(int(np.prod(shape)) for _, shape in net.spec)
    assert total == net.n_params
    p["actor.b1"][0] = 123.0
    assert 123.0 in params  # views alias the flat vector
    with pytest.raises(ContractError):
        net.views(np.zeros(net.n_params + 1))


def test_netconfig_validation():
    with pytest.raises(Exception):
        NetConfig("transformer", 4, 2, 8, 1)
    with pytest.raises(Exception):
        NetConfig("mlp", 4, 2, 8, n_critics=3)


# --- forward consistency -------------------------------------------------------------


def test_mlp_forward_shapes_and_determinism():
    net = ActorCritic(NetConfig("mlp", input_dim=4, action_dim=3, hidden_size=6, n_critics=2))
    params = net.init_params(RngStream(2, 0))
    X = RngStream(3, 0).normal(8 * 4).reshape(8, 4)
    logits, values, _ = net.mlp_forward(net.views(params), X)
    assert logits.shape == (8, 3)
    assert values.shape == (8, 2)
    logits2, values2, _ = net.mlp_forward(net.views(params), X)
    np.testing.assert_array_equal(logits, logits2)
    np.testing.assert_array_equal(values, values2)


def test_gru_forward_matches_stepwise_rollout():
    """The training-time sequence pass and the rollout-time single step must
    be the same function."""
    net = ActorCritic(NetConfig("gru", input_dim=5, action_dim=3, hidden_size=7, n_critics=1))
    params = net.init_params(RngStream(4, 0))
    p = net.views(params)
    T, B = 6, 3
    X = RngStream(5, 0).normal(T * B * 5).reshape(T, B, 5)
    h0 = RngStream(6, 0).normal(B * 7).reshape(B, 7)
    starts = np.zeros((T, B))
    logits_seq, values_seq, h_final, _ = net.gru_forward(p, X, h0, starts)

    h = h0.copy()
    for t in range(T):
        logits_t, values_t, h = net.gru_step(p, X[t], h)
        np.testing.assert_allclose(logits_t, logits_seq[t], atol=1e-13)
        np.testing.assert_allclose(values_t, values_seq[t], atol=1e-13)
    np.testing.assert_allclose(h, h_final, atol=1e-13)


def test_gru_starts_equal_fresh_hidden_state():
    """A start flag at step k makes the suffix identical to a run begun at k
    with zero hidden state."""
    net = ActorCritic(NetConfig("gru", input_dim=4, action_dim=2, hidden_size=5, n_critics=1))
    params = net.init_params(RngStream(8, 0))
    p = net.views(params)
    T, B, k = 7, 2, 3
    X = RngStream(9, 0).normal(T * B * 4).reshape(T, B, 4)
    h0 = RngStream(10, 0).normal(B * 5).reshape(B, 5)
    starts = np.zeros((T, B))
    starts[k, :] = 1.0
    logits_a, _, _, _ = net.gru_forward(p, X, h0, starts)
    logits_b, _, _, _ = net.gru_forward(
        p, X[k:], np.zeros((B, 5)), np.zeros((T - k, B))
    )
    np.testing.assert_allclose(logits_a[k:], logits_b, atol=1e-13)


# --- finite-difference gradient checks ------------------------------------------------


@pytest.mark.parametrize("n_critics", [1, 2])
def test_mlp_gradients_match_finite_differences(n_critics):
    net = ActorCritic(NetConfig("mlp", input_dim=5, action_dim=3, hidden_size=6, n_critics=n_critics))
    params = _generic_params(net, 20 + n_critics)
    B = 7
    X = RngStream(21, 0).normal(B * 5).reshape(B, 5)
    w_logits = RngStream(22, 0).normal(B * 3).reshape(B, 3)
    w_values = RngStream(23, 0).normal(B * n_critics).reshape(B, n_critics)

    def loss(theta):
        logits, values, _ = net.mlp_forward(net.views(theta), X)
        return float(np.sum(logits * w_logits) + np.sum(values * w_values))

    _, _, cache = net.mlp_forward(net.views(params), X)
    analytic = net.mlp_backward(net.views(params), cache, w_logits, w_values)
    assert_grad_close(analytic, _fd_grad(loss, params))


@pytest.mark.parametrize("n_critics", [1, 2])
def test_gru_gradients_match_finite_differences(n_critics):
    net = ActorCritic(NetConfig("gru", input_dim=4, action_dim=3, hidden_size=5, n_critics=n_critics))
    params = _generic_params(net, 30 + n_critics)
    T, B = 5, 3
    X = RngStream(31, 0).normal(T * B * 4).reshape(T, B, 4)
    h0 = RngStream(32, 0).normal(B * 5).reshape(B, 5)
    starts = np.zeros((T, B))
    starts[0, :] = 1.0
    starts[3, 1] = 1.0  # episode boundary mid-sequence
    w_logits = RngStream(33, 0).normal(T * B * 3).reshape(T, B, 3)
    w_values = RngStream(34, 0).normal(T * B * n_critics).reshape(T, B, n_critics)

    def loss(theta):
        logits, values, _, _ = net.gru_forward(net.views(theta), X, h0, starts)
        return float(np.sum(logits * w_logits) + np.sum(values * w_values))

    _, _, _, cache = net.gru_forward(net.views(params), X, h0, starts)
    analytic = net.gru_backward(
        net.views(params),
        cache,
        w_logits.reshape(T * B, 3),
        w_values.reshape(T * B, n_critics),
    )
    assert_grad_close(analytic, _fd_grad(loss, params))
