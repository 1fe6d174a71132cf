import numpy as np
import pytest

from pinnlab import tape
from pinnlab.errors import NonFiniteGradient, NonFiniteLoss
from pinnlab.network import init_network
from pinnlab.optimize import AdamState, ParameterBundle, TrainConfig, adam_step, train


def test_first_step_moves_by_learning_rate_against_sign():
    theta = np.array([1.0, -2.0, 0.5])
    g = np.array([3.0, -0.1, 1e-3])
    new, state = adam_step(theta, g, AdamState.zeros(3), TrainConfig(learning_rate=0.01))
    assert np.allclose(new, theta - 0.01 * np.sign(g), rtol=0, atol=1e-7)
    assert state.t == 1


def test_zero_gradient_leaves_parameters():
    theta = np.array([1.0, 2.0])
    new, _ = adam_step(theta, np.zeros(2), AdamState.zeros(2))
    assert np.array_equal(new, theta)


def test_two_steps_match_hand_rolled_adam():
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    th = 1.5
    m = v = 0.0
    for t in (1, 2):
        g = 2 * th
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        th = th - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    theta, state = np.array([1.5]), AdamState.zeros(1)
    cfg = TrainConfig(learning_rate=lr)
    for _ in range(2):
        theta, state = adam_step(theta, 2 * theta, state, cfg)
    assert abs(theta[0] - th) <= 1e-15


def test_adam_step_rejects_non_finite_gradient():
    with pytest.raises(NonFiniteGradient):
        adam_step(np.zeros(2), np.array([np.nan, 0.0]), AdamState.zeros(2))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


def _quadratic(bundle):
    net, scalars = bundle
    return ((scalars - 3.0) * (scalars - 3.0)).sum()


def test_quadratic_converges():
    model = ParameterBundle(init_network([1, 1], "tanh", seed=0), np.array([0.0, 1.0]))
    result = train(model, _quadratic, TrainConfig(iterations=1000, learning_rate=0.05, log_every=0))
    assert result.best_loss <= 1e-6
    assert np.allclose(result.best_network.scalars, 3.0, atol=1e-3)


def _fit_objective(net):
    Z = np.linspace(-1, 1, 9)[:, None]
    r = net.value(Z)[:, 0] - np.sin(3 * Z[:, 0])
    return (r * r).mean()


def test_training_is_deterministic_and_history_monotone():
    cfg = TrainConfig(iterations=200, learning_rate=1e-2, log_every=50)
    a = train(init_network([1, 8, 1], "tanh", seed=1), _fit_objective, cfg)
    b = train(init_network([1, 8, 1], "tanh", seed=1), _fit_objective, cfg)
    assert np.array_equal(a.raw_loss_history, b.raw_loss_history)
    assert np.array_equal(a.best_theta, b.best_theta)
    assert np.all(np.diff(a.loss_history) <= 0)
    assert len(a.raw_loss_history) == 201
    assert a.best_loss == a.raw_loss_history[a.best_iteration]
    assert [r["iteration"] for r in a.log_rows] == [0, 50, 100, 150, 200]


def test_best_network_reproduces_best_loss():
    res = train(init_network([1, 8, 1], "tanh", seed=2), _fit_objective, TrainConfig(iterations=100, learning_rate=1e-2))
    assert float(_fit_objective(res.best_network).data) == res.best_loss


def test_ridge_adds_penalty_at_initial_point():
    net = init_network([1, 4, 1], "tanh", seed=0)
    plain = train(net, _fit_objective, TrainConfig(iterations=1, learning_rate=1e-9))
    ridged = train(net, _fit_objective, TrainConfig(iterations=1, learning_rate=1e-9, ridge=(0.5, 2)))
    theta = net.to_flat()
    assert ridged.raw_loss_history[0] == pytest.approx(plain.raw_loss_history[0] + 0.5 * np.linalg.norm(theta), rel=1e-13)


def test_non_finite_loss_raises():
    bad = lambda net: net.value(np.zeros((1, 1))).sum() * np.inf
    with pytest.raises(NonFiniteLoss), np.errstate(all="ignore"):
        train(init_network([1, 2, 1], "tanh", seed=0), bad, TrainConfig(iterations=3))


def test_log_file_and_terms(tmp_path):
    def obj(net):
        loss = _fit_objective(net)
        return loss, {"total": loss, "pde": loss}
    path = tmp_path / "log.csv"
    train(init_network([1, 4, 1], "tanh", seed=0), obj, TrainConfig(iterations=10, log_every=5), log_path=path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,raw_loss,best_loss,pde"
    assert len(lines) == 4
