import numpy as np
import pytest

from pinnlab import tape
from pinnlab.collocation import CollocationSet, build_slit_domain
from pinnlab.errors import DimensionMismatch, StencilOutOfRange, UnsupportedExponent
from pinnlab.losses import (LinearStencilResidual, LossWeights, adpinn_loss, fd_loss, fdpinn_loss,
                            ridge_penalty, residual_form)
from pinnlab.models.poisson import (assemble_poisson_slit, poisson_boundary_ad, poisson_fd_residual,
                                    poisson_residual_ad, solve_poisson_fdm)
from pinnlab.network import Network, init_network, zero_network
from pinnlab.witness import interpolate_values

ODE = residual_form(lambda Z, jet: jet.grad[:, 0, :] - 1.0, order=1)
ODE_BC = residual_form(lambda Z, jet: jet.val, order=0)


def _three_points():
    return CollocationSet(interior=np.array([[0.25], [0.5], [0.75]]), boundary=np.zeros((1, 1)))


def test_all_weights_zero_gives_zero():
    net = init_network([1, 4, 1], "tanh", seed=0)
    out = adpinn_loss(net, _three_points(), ODE, ODE_BC, LossWeights(0.0, 0.0, 0.0))
    assert out.total == 0.0


def test_affine_exact_solution_has_zero_loss():
    net = Network((np.array([[1.0]]),), (np.zeros(1),), "tanh")  # u(z) = z solves u' = 1, u(0) = 0
    assert adpinn_loss(net, _three_points(), ODE, ODE_BC).total == 0.0


@pytest.mark.parametrize("nu", [1, 2])
def test_adpinn_matches_hand_sum(nu):
    net = init_network([1, 5, 1], "tanh", seed=4)
    colloc = _three_points()
    z = colloc.interior[:, 0]
    h = 1e-6
    du = (net(colloc.interior + h)[:, 0] - net(colloc.interior - h)[:, 0]) / (2 * h)
    w = LossWeights(alpha_F=2.0, alpha_B=3.0, nu=nu)
    expected = 2.0 * np.mean(np.abs(du - 1.0) ** nu) + 3.0 * abs(net(np.zeros((1, 1)))[0, 0]) ** nu
    out = adpinn_loss(net, colloc, ODE, ODE_BC, w)
    assert out.total == pytest.approx(expected, rel=1e-8)
    assert out.total == pytest.approx(out.pde + out.boundary + out.data, rel=1e-14)
    assert len(z) == 3


def test_weight_scaling():
    net = init_network([1, 5, 1], "tanh", seed=4)
    base = adpinn_loss(net, _three_points(), ODE, ODE_BC, LossWeights())
    scaled = adpinn_loss(net, _three_points(), ODE, ODE_BC, LossWeights().scaled(3.0))
    assert scaled.pde == pytest.approx(3 * base.pde, rel=1e-14)
    assert scaled.boundary == pytest.approx(3 * base.boundary, rel=1e-14)


def test_data_term():
    colloc = CollocationSet(interior=np.zeros((0, 1)), boundary=np.zeros((0, 1)),
                            data_points=np.array([[0.0], [1.0]]), data_targets=np.array([[1.0], [3.0]]))
    net = Network((np.array([[2.0]]),), (np.array([1.0]),), "tanh")  # u = 2z + 1 matches the data
    assert adpinn_loss(net, colloc, ODE, ODE_BC, LossWeights(alpha_D=1.0)).data == 0.0


def _poisson(h=0.1):
    grid, colloc = build_slit_domain(h)
    system = assemble_poisson_slit(grid, colloc)
    return colloc, system, poisson_fd_residual(system)


def test_fdpinn_zero_net_on_poisson_is_one():
    colloc, _, D = _poisson()
    assert fdpinn_loss(zero_network([2, 3, 1], "relu"), colloc, D).total == pytest.approx(1.0, rel=1e-14)


def test_fd_loss_of_fdm_solution_and_agreement_with_interpolant():
    colloc, system, D = _poisson()
    u = solve_poisson_fdm(system)
    assert fd_loss(u, D).pde <= 1e-20
    rng = np.random.default_rng(0)
    v = u + 0.01 * rng.standard_normal(u.size)
    net = interpolate_values(system.nodes, v, "relu")
    assert np.max(np.abs(net(system.nodes)[:, 0] - v)) <= 1e-9
    assert fdpinn_loss(net, colloc, D).total == pytest.approx(fd_loss(v, D).total, rel=1e-6)


def test_nu_one_versus_two():
    A = np.eye(2)
    D = LinearStencilResidual(np.zeros((2, 1)), A, np.zeros(2))
    u = np.array([0.5, -2.0])
    assert fd_loss(u, D, w=LossWeights(nu=1)).total == pytest.approx(np.mean(np.abs(u)))
    assert fd_loss(u, D, w=LossWeights(nu=2)).total == pytest.approx(np.mean(u ** 2))


def test_fd_loss_errors():
    colloc, _, D = _poisson()
    with pytest.raises(DimensionMismatch):
        fd_loss(np.zeros(5), D)
    other = CollocationSet(interior=np.array([[0.0, 0.0]]), boundary=np.zeros((0, 2)))
    with pytest.raises(StencilOutOfRange):
        fdpinn_loss(zero_network([2, 1]), other, D)


def test_relu_net_accepted_by_fdpinn_loss_even_on_kinks():
    colloc, _, D = _poisson()
    net = zero_network([2, 4, 1], "relu")  # every pre-activation is exactly zero
    assert np.isfinite(fdpinn_loss(net, colloc, D).total)


def test_ridge_penalty():
    assert ridge_penalty(np.zeros(4), LossWeights(alpha_theta=1.0)) == 0.0
    assert ridge_penalty(np.array([3.0, 4.0]), LossWeights(alpha_theta=1.0, q=2)) == 5.0
    theta = np.random.default_rng(1).standard_normal(10)
    assert ridge_penalty(theta, LossWeights(alpha_theta=0.5, q=1)) == pytest.approx(0.5 * np.sum(np.abs(theta)))
    t = ridge_penalty(tape.Tensor(np.array([3.0, 4.0])), LossWeights(alpha_theta=2.0, q=2))
    assert float(t.data) == 10.0
    with pytest.raises(UnsupportedExponent):
        ridge_penalty(theta, LossWeights(alpha_theta=1.0, q=3))


def test_kink_propagates_from_adpinn():
    from pinnlab.errors import KinkAtPoint

    colloc, _, _ = _poisson()
    with pytest.raises(KinkAtPoint):
        adpinn_loss(zero_network([2, 4, 1], "relu"), colloc, poisson_residual_ad, poisson_boundary_ad)
