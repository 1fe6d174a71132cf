import numpy as np
import pytest

from pinnlab import tape
from pinnlab.autodiff import (eval_jet2, fd_gradient_oracle, fd_jet_oracle, parameter_gradient,
                              random_gradcheck)
from pinnlab.errors import KinkAtPoint, NonFiniteGradient
from pinnlab.network import Network, init_network


def _identity_relu():
    # f(x) = relu(x) - relu(-x)
    return Network((np.array([[1.0], [-1.0]]), np.array([[1.0, -1.0]])), (np.zeros(2), np.zeros(1)), "relu")


def test_relu_identity_jet():
    jet = eval_jet2(_identity_relu(), np.array([1.0]))
    assert jet.value[0] == 1.0
    assert jet.grad[0, 0] == 1.0
    assert jet.hess[0, 0, 0] == 0.0


def test_single_tanh_unit_jet_at_zero():
    net = Network((np.ones((1, 1)), np.ones((1, 1))), (np.zeros(1), np.zeros(1)), "tanh")
    jet = eval_jet2(net, np.zeros(1))
    assert (jet.value[0], jet.grad[0, 0], jet.hess[0, 0, 0]) == (0.0, 1.0, 0.0)


def test_kink_detected():
    with pytest.raises(KinkAtPoint):
        eval_jet2(_identity_relu(), np.zeros(1))


@pytest.mark.parametrize("seed", range(5))
def test_tanh_jet_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = init_network([3, 8, 8, 8, 2], "tanh", seed=seed)
    z = rng.uniform(-1, 1, 3)
    jet = eval_jet2(net, z)
    ref = fd_jet_oracle(net, z)
    for a, b in ((jet.value, ref.value), (jet.grad, ref.grad), (jet.hess, ref.hess)):
        assert np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))) <= 1e-5


def test_hessian_symmetric():
    net = init_network([3, 6, 6, 2], "tanh", seed=4)
    jet = eval_jet2(net, np.random.default_rng(0).uniform(-1, 1, (7, 3)))
    H = jet.hess
    assert np.max(np.abs(H - np.swapaxes(H, -1, -2))) <= 1e-12 * (1 + np.max(np.abs(H)))


def test_batched_jet_equals_pointwise():
    net = init_network([2, 5, 1], "tanh", seed=1)
    Z = np.random.default_rng(1).uniform(-1, 1, (4, 2))
    batch = eval_jet2(net, Z)
    for i, z in enumerate(Z):
        single = eval_jet2(net, z)
        assert np.array_equal(batch.hess[i], single.hess)


def test_gradient_zero_on_output_path_when_output_is_zero():
    net = init_network([2, 4, 1], "tanh", seed=0)
    Ws = list(net.weights)
    Ws[-1] = np.zeros_like(Ws[-1])
    net = Network(tuple(Ws), net.biases, net.activation)
    z = np.array([[0.3, -0.2]])
    g = parameter_gradient(net, lambda m: (m.value(z) * m.value(z)).sum()).grad
    assert np.all(g == 0.0)


def test_linear_relu_net_matches_normal_equation_gradient():
    # all hidden units active on the data, so the net is affine: u = c (W x + b) + b2
    W = np.array([[1.0, 0.5], [0.2, 1.0]])
    b = np.array([3.0, 3.0])
    c = np.array([[0.7, -0.4]])
    net = Network((W, c), (b, np.array([0.1])), "relu")
    X = np.array([[0.1, 0.2], [0.5, -0.3], [-0.4, 0.6]])
    y = np.array([1.0, -2.0, 0.5])
    res = parameter_gradient(net, lambda m: ((m.value(X)[:, 0] - y) ** 2).sum())
    H = X @ W.T + b
    r = H @ c[0] + 0.1 - y
    grad_c = 2 * H.T @ r
    grad_b2 = 2 * r.sum()
    assert np.allclose(res.grad[-3:-1], grad_c, rtol=1e-13)
    assert np.isclose(res.grad[-1], grad_b2, rtol=1e-13)


def test_parameter_gradient_matches_fd_and_is_deterministic():
    net = init_network([2, 6, 6, 1], "tanh", seed=2)
    Z = np.random.default_rng(2).uniform(-1, 1, (5, 2))

    def objective(m):
        j = m.jet(Z)
        r = j.hess[:, 0, 0, :] + j.hess[:, 1, 1, :] + j.val
        return (r * r).mean()

    a = parameter_gradient(net, objective)
    b = parameter_gradient(net, objective)
    assert np.array_equal(a.grad, b.grad)
    fd = fd_gradient_oracle(net, objective)
    big = np.abs(fd) > 1e-8
    assert np.max(np.abs(a.grad[big] - fd[big]) / np.abs(fd[big])) <= 1e-5
    assert a.grad.size == net.n_params


def test_fd_oracle_constant_and_quadratic():
    net = init_network([1, 2, 1], "tanh", seed=0)
    assert np.all(fd_gradient_oracle(net, lambda m: tape.Tensor(np.array(3.0))) == 0.0)
    theta0 = net.to_flat()[0]
    g = fd_gradient_oracle(net, lambda m: m.to_flat()[0] ** 2, step=1e-3)
    assert g[0] == pytest.approx(2 * theta0, rel=1e-12)
    with pytest.raises(ValueError):
        fd_gradient_oracle(net, lambda m: 0.0, step=0.0)


def test_non_finite_gradient_raises():
    net = init_network([1, 1], "tanh", seed=0)
    with pytest.raises(NonFiniteGradient), np.errstate(all="ignore"):
        parameter_gradient(net, lambda m: tape.sqrt(m.value(np.zeros((1, 1))) * 0.0).sum())


def test_random_gradcheck_small():
    rows = random_gradcheck(n_configs=12, seed=3)
    assert {r["activation"] for r in rows} == {"relu", "tanh"}
    assert max(r["grad_rel_err"] for r in rows) <= 1e-5
    assert max(r["jet_err"] for r in rows) <= 1e-5
