"""Fully connected feedforward networks, their jets, and the constructions on them.

A network with widths ``(d0, ..., dL)`` has ``L`` affine layers; the
activation follows every affine layer except the last.  Parameters are
flattened layer by layer, weights (row-major) before biases.

Input derivatives are carried as jets with the neuron axis last:

* ``val``  shape ``(B, n)``
* ``grad`` shape ``(B, d, n)``  (``grad[b, i, k] = d y_k / d z_i``)
* ``hess`` shape ``(B, d, d, n)``

``hess`` (and ``grad``) may be ``None`` meaning identically zero or not
requested.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import tape
from .activations import RELU, Activation, get_activation
from .errors import IncompatibleNetworks, InvalidArchitecture, KinkAtPoint, WrongActivation

CHECKPOINT_FORMAT = "pinnlab-network/1"


class TJet(NamedTuple):
    val: tape.Tensor
    grad: Optional[tape.Tensor] = None
    hess: Optional[tape.Tensor] = None


def _propagate(layers, act, Z, order, check_kinks=True):
    """Push a jet of the given order through ``layers`` [(W, b), ...]."""
    B, d = Z.shape
    val = tape.Tensor(Z)
    grad = None
    hess = None
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        Wt = W.T
        pre = val @ Wt + b
        if order >= 1:
            if grad is None:
                g = Wt.reshape(1, d, Wt.shape[1])
            else:
                g = grad @ Wt
        if order >= 2 and hess is not None:
            hs = hess @ Wt
        else:
            hs = None
        if i == last:
            val = pre
            if order >= 1:
                grad = g
            if order >= 2:
                hess = hs
            break
        if check_kinks and order >= 1 and not act.smooth and np.any(pre.data == 0.0):
            bad = np.argwhere(pre.data == 0.0)[0]
            raise KinkAtPoint(f"pre-activation exactly zero in layer {i + 1} at point index {bad[0]}, unit {bad[1]}")
        n = pre.shape[1]
        val = act.fn(pre)
        if order >= 1:
            s1 = act.d1(pre)
            s1g = s1.reshape(B, 1, n)
            new_grad = g * s1g
            if order >= 2:
                s2 = act.d2(pre)
                parts = []
                if hs is not None:
                    parts.append(hs * s1.reshape(B, 1, 1, n))
                if s2 is not None:
                    gb = g if g.shape[0] == B else g * tape.Tensor(np.ones((B, 1, 1), dtype=g.data.dtype))
                    outer = gb.reshape(B, d, 1, n) * gb.reshape(B, 1, d, n)
                    parts.append(outer * s2.reshape(B, 1, 1, n))
                hess = None
                for p in parts:
                    hess = p if hess is None else hess + p
            grad = new_grad
    if order >= 1 and grad is not None and grad.shape[0] != B:
        grad = grad * tape.Tensor(np.ones((B, 1, 1), dtype=grad.data.dtype))
    if order >= 2 and hess is None:
        hess = tape.Tensor(np.zeros((B, d, d, val.shape[1]), dtype=val.data.dtype))
    return TJet(val, grad if order >= 1 else None, hess if order >= 2 else None)


def _propagate_value(layers, act, Z):
    h = tape.Tensor(Z)
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        h = h @ W.T + b
        if i != last:
            h = act.fn(h)
    return h


class _Model:
    """Shared interface: ``value``/``jet`` return tape objects, ``__call__`` numpy."""

    def __call__(self, Z):
        Z = np.asarray(Z, dtype=float)
        single = Z.ndim == 1
        out = self.value(np.atleast_2d(Z)).data
        return out[0] if single else out

    def eval(self, Z):
        return self(Z)


@dataclass(frozen=True, eq=False)
class Network(_Model):
    weights: tuple
    biases: tuple
    activation: Activation
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(np.asarray(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(np.asarray(b) for b in self.biases))
        object.__setattr__(self, "activation", get_activation(self.activation))
        if len(self.weights) == 0 or len(self.weights) != len(self.biases):
            raise InvalidArchitecture("need at least one layer and one bias per layer")
        prev = self.weights[0].shape[1]
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or W.shape[1] != prev or b.shape != (W.shape[0],) or 0 in W.shape:
                raise InvalidArchitecture("inconsistent layer shapes")
            prev = W.shape[0]

    # -- structure ----------------------------------------------------------
    @property
    def widths(self):
        return (self.weights[0].shape[1],) + tuple(W.shape[0] for W in self.weights)

    @property
    def depth(self):
        return len(self.weights)

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    @property
    def input_dim(self):
        return self.widths[0]

    @property
    def output_dim(self):
        return self.widths[-1]

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def base(self):
        return self

    # -- parameters ---------------------------------------------------------
    def to_flat(self):
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts).astype(float)

    def with_flat(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise InvalidArchitecture(f"expected {self.n_params} parameters, got {theta.size}")
        Ws, bs, k = [], [], 0
        for W, b in zip(self.weights, self.biases):
            Ws.append(theta[k:k + W.size].reshape(W.shape).astype(self.dtype))
            k += W.size
            bs.append(theta[k:k + b.size].astype(self.dtype))
            k += b.size
        return Network(tuple(Ws), tuple(bs), self.activation, self.seed)

    def bind(self, theta):
        """View of this architecture whose parameters are slices of tape tensor ``theta``."""
        layers, k = [], 0
        for W, b in zip(self.weights, self.biases):
            Wt = theta[k:k + W.size].reshape(W.shape)
            k += W.size
            bt = theta[k:k + b.size]
            k += b.size
            layers.append((Wt, bt))
        return BoundNetwork(self, layers)

    def astype(self, dtype):
        return Network(tuple(W.astype(dtype) for W in self.weights),
                       tuple(b.astype(dtype) for b in self.biases), self.activation, self.seed)

    # -- evaluation ---------------------------------------------------------
    def _layers(self):
        return [(tape.Tensor(W), tape.Tensor(b)) for W, b in zip(self.weights, self.biases)]

    def value(self, Z):
        Z = np.asarray(Z, dtype=self.dtype)
        return _propagate_value(self._layers(), self.activation, Z)

    def jet(self, Z, order=2):
        Z = np.asarray(Z, dtype=self.dtype)
        return _propagate(self._layers(), self.activation, Z, order)

    # -- persistence --------------------------------------------------------
    def to_dict(self):
        return {
            "format": CHECKPOINT_FORMAT,
            "widths": list(self.widths),
            "activation": self.activation.name,
            "seed": self.seed,
            "theta": [float(x) for x in self.to_flat()],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != CHECKPOINT_FORMAT:
            raise InvalidArchitecture(f"unrecognised checkpoint format {data.get('format')!r}")
        skeleton = zero_network(data["widths"], data["activation"], seed=data.get("seed"))
        return skeleton.with_flat(np.array(data["theta"], dtype=float))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class BoundNetwork(_Model):
    """A network whose layers are tape tensors (used inside objectives)."""

    def __init__(self, net, layers):
        self.net = net
        self.layers = layers
        self.activation = net.activation

    @property
    def widths(self):
        return self.net.widths

    def value(self, Z):
        return _propagate_value(self.layers, self.activation, np.asarray(Z, dtype=self.net.dtype))

    def jet(self, Z, order=2):
        return _propagate(self.layers, self.activation, np.asarray(Z, dtype=self.net.dtype), order)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _check_widths(widths):
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise InvalidArchitecture("need at least input and output widths")
    if min(widths) < 1:
        raise InvalidArchitecture(f"all widths must be >= 1, got {widths}")
    return widths


def init_network(widths, activation="tanh", seed=0):
    """Glorot-uniform weights, zero biases."""
    widths = _check_widths(widths)
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return Network(tuple(Ws), tuple(bs), get_activation(activation), seed)


def zero_network(widths, activation="tanh", seed=None):
    widths = _check_widths(widths)
    Ws = tuple(np.zeros((o, i)) for i, o in zip(widths[:-1], widths[1:]))
    bs = tuple(np.zeros(o) for o in widths[1:])
    return Network(Ws, bs, get_activation(activation), seed)


def count_parameters(widths):
    return sum(o * (i + 1) for i, o in zip(widths[:-1], widths[1:]))


def linear_combine(f: Network, g: Network, c1: float, c2: float) -> Network:
    """Network realizing ``c1*f + c2*g`` by stacking the hidden layers side by side."""
    if f.activation.name != g.activation.name:
        raise IncompatibleNetworks("activations differ")
    if f.depth != g.depth or f.input_dim != g.input_dim or f.output_dim != g.output_dim:
        raise IncompatibleNetworks(f"shapes differ: {f.widths} vs {g.widths}")
    L = f.depth
    if L == 1:
        W = c1 * f.weights[0] + c2 * g.weights[0]
        b = c1 * f.biases[0] + c2 * g.biases[0]
        return Network((W,), (b,), f.activation)
    Ws = [np.vstack([f.weights[0], g.weights[0]])]
    bs = [np.concatenate([f.biases[0], g.biases[0]])]
    for Wf, Wg, bf, bg in zip(f.weights[1:-1], g.weights[1:-1], f.biases[1:-1], g.biases[1:-1]):
        top = np.hstack([Wf, np.zeros((Wf.shape[0], Wg.shape[1]))])
        bottom = np.hstack([np.zeros((Wg.shape[0], Wf.shape[1])), Wg])
        Ws.append(np.vstack([top, bottom]))
        bs.append(np.concatenate([bf, bg]))
    Ws.append(np.hstack([c1 * f.weights[-1], c2 * g.weights[-1]]))
    bs.append(c1 * f.biases[-1] + c2 * g.biases[-1])
    return Network(tuple(Ws), tuple(bs), f.activation)


def deepen_relu_identity(net: Network, target_depth: int) -> Network:
    """Add layers using ``x = relu(x) - relu(-x)`` without changing the realized function.

    Each insertion splits the last hidden layer into its positive and
    negated copies and recombines them in a new layer, so the new
    pre-activations equal the old ones and no kinks are introduced.
    """
    if net.activation.name != RELU.name:
        raise WrongActivation("identity deepening needs ReLU")
    if target_depth < net.depth:
        raise InvalidArchitecture(f"target depth {target_depth} < current depth {net.depth}")
    Ws, bs = list(net.weights), list(net.biases)
    while len(Ws) < target_depth:
        if len(Ws) == 1:
            W, b = Ws[0], bs[0]
            n = W.shape[0]
            Ws = [np.vstack([W, -W]), np.hstack([np.eye(n), -np.eye(n)])]
            bs = [np.concatenate([b, -b]), np.zeros(n)]
            continue
        i = len(Ws) - 2  # last hidden layer
        W, b = Ws[i], bs[i]
        n = W.shape[0]
        Ws[i] = np.vstack([W, -W])
        bs[i] = np.concatenate([b, -b])
        Ws.insert(i + 1, np.hstack([np.eye(n), -np.eye(n)]))
        bs.insert(i + 1, np.zeros(n))
    return Network(tuple(Ws), tuple(bs), net.activation, net.seed)


# ---------------------------------------------------------------------------
# hard constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplicativeMask:
    """``u(z) = m(z) * net(z)``; ``fn(Z, order)`` returns (val, grad, hess) arrays."""

    fn: Callable


@dataclass(frozen=True)
class AdditiveAnchor:
    """``u(z) = g0(z) + s(z) * net(z)``."""

    anchor: Callable
    scale: Callable


def _const_jet(arrays, order):
    val, grad, hess = arrays
    out = [tape.Tensor(np.asarray(val))]
    out.append(tape.Tensor(np.asarray(grad)) if order >= 1 else None)
    out.append(tape.Tensor(np.asarray(hess)) if order >= 2 else None)
    return TJet(*out)


def _product_jet(m: TJet, u: TJet, order):
    B, d = u.grad.shape[:2] if order >= 1 else (u.val.shape[0], None)
    val = m.val * u.val
    grad = hess = None
    if order >= 1:
        grad = m.grad * u.val.reshape(B, 1, -1) + m.val.reshape(B, 1, -1) * u.grad
    if order >= 2:
        c = u.val.shape[1]
        k = m.val.shape[1]
        cross = m.grad.reshape(B, d, 1, k) * u.grad.reshape(B, 1, d, c)
        hess = (m.hess * u.val.reshape(B, 1, 1, c) + cross + cross.swapaxes(1, 2)
                + m.val.reshape(B, 1, 1, k) * u.hess)
    return TJet(val, grad, hess)


class ConstrainedNetwork(_Model):
    def __init__(self, base, constraint):
        self.base = base
        self.constraint = constraint

    @property
    def widths(self):
        return self.base.widths

    @property
    def activation(self):
        return self.base.activation

    @property
    def n_params(self):
        return self.base.n_params

    def to_flat(self):
        return self.base.to_flat()

    def with_flat(self, theta):
        return ConstrainedNetwork(self.base.with_flat(theta), self.constraint)

    def bind(self, theta):
        return ConstrainedNetwork(self.base.bind(theta), self.constraint)

    def jet(self, Z, order=2):
        Z = np.asarray(Z, dtype=float)
        u = self.base.jet(Z, order)
        c = self.constraint
        if isinstance(c, MultiplicativeMask):
            return _product_jet(_const_jet(c.fn(Z, order), order), u, order)
        s = _const_jet(c.scale(Z, order), order)
        g0 = _const_jet(c.anchor(Z, order), order)
        prod = _product_jet(s, u, order)
        return TJet(prod.val + g0.val,
                    prod.grad + g0.grad if order >= 1 else None,
                    prod.hess + g0.hess if order >= 2 else None)

    def value(self, Z):
        Z = np.asarray(Z, dtype=float)
        u = self.base.value(Z)
        c = self.constraint
        if isinstance(c, MultiplicativeMask):
            return tape.Tensor(c.fn(Z, 0)[0]) * u
        return tape.Tensor(c.anchor(Z, 0)[0]) + tape.Tensor(c.scale(Z, 0)[0]) * u


def wrap_hard_constraint(net, constraint) -> ConstrainedNetwork:
    return ConstrainedNetwork(net, constraint)


def _zeros_jet(B, d, k):
    return np.zeros((B, d, k)), np.zeros((B, d, d, k))


def constant_mask(value):
    """Mask m(z) = value (handy for tests: value 0 kills the network)."""

    def fn(Z, order=2):
        B, d = Z.shape
        g, h = _zeros_jet(B, d, 1)
        return np.full((B, 1), float(value)), g, h

    return MultiplicativeMask(fn)
