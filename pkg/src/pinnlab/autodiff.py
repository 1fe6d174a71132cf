"""Input jets and parameter gradients of networks, plus finite-difference oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import NonFiniteGradient


@dataclass(frozen=True)
class Jet2:
    """Value ``(c,)``, gradient ``(c, d)`` and Hessian ``(c, d, d)`` at one point.

    Batched jets carry an extra leading axis.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


@dataclass(frozen=True)
class ParameterGradient:
    objective_value: float
    grad: np.ndarray


def eval_jet2(net, z) -> Jet2:
    """Exact value, input gradient and input Hessian of ``net`` at ``z`` (one point or a batch)."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    jet = net.jet(np.atleast_2d(z), order=2)
    value = jet.val.data
    grad = np.swapaxes(jet.grad.data, 1, 2)  # (B, c, d)
    hess = np.moveaxis(jet.hess.data, 3, 1)  # (B, c, d, d)
    if single:
        return Jet2(value[0], grad[0], hess[0])
    return Jet2(value, grad, hess)


def _scalar(out):
    if isinstance(out, tape.Tensor):
        return out
    return tape.Tensor(np.asarray(out, dtype=float))


def parameter_gradient(net, objective) -> ParameterGradient:
    """Objective value and its exact gradient with respect to the flat parameter vector.

    ``objective`` receives a model view of ``net`` whose parameters live on
    the tape (``net.bind``) and must return a scalar tensor.
    """
    theta = tape.Tensor(net.to_flat().copy(), requires_grad=True)
    out = _scalar(objective(net.bind(theta)))
    if out.requires_grad:
        out.backward()
    grad = theta.grad if theta.grad is not None else np.zeros_like(theta.data)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient(f"{np.count_nonzero(~np.isfinite(grad))} non-finite gradient components")
    return ParameterGradient(float(out.data), np.asarray(grad, dtype=float))


def fd_gradient_oracle(net, objective, step=1e-5):
    """Central differences of ``objective`` in every parameter."""
    if step <= 0:
        raise ValueError("step must be positive")
    theta = net.to_flat()
    out = np.empty_like(theta)
    for i in range(theta.size):
        tp = theta.copy()
        tp[i] += step
        tm = theta.copy()
        tm[i] -= step
        fp = float(_scalar(objective(net.with_flat(tp))).data)
        fm = float(_scalar(objective(net.with_flat(tm))).data)
        out[i] = (fp - fm) / (2.0 * step)
    return out


def fd_jet_oracle(f, z, step_grad=1e-4, step_hess=1e-4):
    """Finite-difference jet of a vector function ``f: R^d -> R^c`` at ``z``.

    The gradient is a central difference of values; the Hessian is a
    central difference of the (central-difference) gradient, symmetrized.
    """
    z = np.asarray(z, dtype=float)
    d = z.size
    value = np.atleast_1d(np.asarray(f(z), dtype=float))

    def grad_at(x, h):
        cols = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            cols.append((np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * h))
        return np.stack(cols, axis=-1)

    grad = grad_at(z, step_grad)
    slices = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = step_hess
        slices.append((grad_at(z + e, step_grad) - grad_at(z - e, step_grad)) / (2 * step_hess))
    hess = np.stack(slices, axis=-1)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    return Jet2(value, grad, hess)


# ---------------------------------------------------------------------------
# randomized agreement suite
# ---------------------------------------------------------------------------

def _min_abs_preactivation(net, Z):
    h = np.asarray(Z, dtype=float)
    lowest = np.inf
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        pre = h @ W.T + b
        lowest = min(lowest, float(np.min(np.abs(pre))))
        h = net.activation.numpy(pre)
    return lowest


def _jet_objective(kind, Z, mix):
    """Scalar objectives built from network jets (kind 'ad') or node values (kind 'fd')."""
    if kind == "fd":
        def obj(model):
            r = model.value(Z) @ mix[0] - mix[1]
            return (r * r).mean()
        return obj

    def obj(model):
        jet = model.jet(Z, order=2)
        B = Z.shape[0]
        r = (jet.val * mix[0]
             + jet.grad.reshape(B, -1).sum(axis=1, keepdims=True) * mix[1]
             + jet.hess.reshape(B, -1).sum(axis=1, keepdims=True) * mix[2] - mix[3])
        return (r * r).mean()
    return obj


def random_gradcheck(n_configs=100, seed=0, step=1e-5, component_floor=1e-8, kink_margin=1e-3):
    """Compare tape gradients and jets against finite differences on random networks.

    Each configuration draws an activation (alternating ReLU and tanh), a
    small architecture, a batch of points and an objective built either
    from input jets or from node values.  ReLU points are redrawn until
    every pre-activation is at least ``kink_margin`` away from a kink, so
    the finite-difference oracles stay on one linear piece.

    Returns a list of per-configuration dicts with the worst relative
    parameter-gradient error (over components above ``component_floor``)
    and the worst jet error (relative to ``max(1, |oracle|)``).
    """
    from .network import init_network

    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_configs):
        act = ("relu", "tanh")[k % 2]
        d = int(rng.integers(1, 4))
        c = int(rng.integers(1, 3))
        hidden = [int(rng.integers(2, 7)) for _ in range(int(rng.integers(1, 4)))]
        net = init_network([d] + hidden + [c], act, seed=int(rng.integers(2 ** 31)))
        theta = net.to_flat() + 0.3 * rng.standard_normal(net.n_params)
        net = net.with_flat(theta)
        B = int(rng.integers(1, 5))
        for _ in range(100):
            Z = rng.uniform(-1.0, 1.0, (B, d))
            if net.activation.smooth or _min_abs_preactivation(net, Z) > kink_margin:
                break
        else:
            raise RuntimeError("could not place points away from kinks")
        kind = ("ad", "fd")[(k // 2) % 2]
        if kind == "fd":
            mix = (rng.standard_normal((c, 1)), rng.standard_normal((B, 1)))
        else:
            mix = (rng.standard_normal(c), rng.standard_normal(c), rng.standard_normal(c),
                   rng.standard_normal((B, c)))
        objective = _jet_objective(kind, Z, mix)
        exact = parameter_gradient(net, objective).grad
        approx = fd_gradient_oracle(net, objective, step)
        big = np.abs(approx) > component_floor
        grad_err = float(np.max(np.abs(exact[big] - approx[big]) / np.abs(approx[big]))) if big.any() else 0.0
        z = Z[0]
        jet = eval_jet2(net, z)
        ref = fd_jet_oracle(net, z)
        jet_err = 0.0
        for a, b in ((jet.value, ref.value), (jet.grad, ref.grad), (jet.hess, ref.hess)):
            jet_err = max(jet_err, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))))
        out.append({"index": k, "activation": act, "widths": [d] + hidden + [c], "points": B,
                    "objective": kind, "n_compared": int(big.sum()), "grad_rel_err": grad_err,
                    "jet_err": jet_err})
    return out
