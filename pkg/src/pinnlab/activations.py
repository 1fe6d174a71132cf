"""Elementwise activation functions with the derivative information the jets need."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from . import tape
from .errors import ConfigError


@dataclass(frozen=True)
class Activation:
    """An activation σ.

    ``fn`` acts on tape tensors, ``d1``/``d2`` return σ' and σ'' as tensors
    (so parameter gradients flow through them), and ``derivative(z, k)``
    evaluates σ^(k) numerically for any order, which the Hermite
    constructions need.
    """

    name: str
    fn: Callable
    d1: Callable
    d2: Callable
    derivative: Callable
    smooth: bool
    monotone: bool = True

    def __call__(self, z):
        return self.fn(z)

    def numpy(self, z):
        return self.derivative(np.asarray(z, dtype=float), 0)


@lru_cache(maxsize=None)
def _tanh_poly(k):
    """Coefficients (in t = tanh z) of the k-th derivative of tanh."""
    p = np.array([0.0, 1.0])
    chain = np.array([1.0, 0.0, -1.0])  # 1 - t^2
    for _ in range(k):
        p = P.polymul(P.polyder(p), chain)
    return p


def _tanh_derivative(z, k):
    t = np.tanh(z)
    return P.polyval(t, _tanh_poly(k))


def _sigmoid_derivative(z, k):
    # sigmoid(z) = (1 + tanh(z/2)) / 2
    if k == 0:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return 0.5 ** (k + 1) * _tanh_derivative(0.5 * z, k)


def _softplus_derivative(z, k):
    if k == 0:
        return np.logaddexp(0.0, z)
    return _sigmoid_derivative(z, k - 1)


def _relu_derivative(z, k):
    if k == 0:
        return np.maximum(z, 0.0)
    if k == 1:
        return (z > 0).astype(float)
    return np.zeros_like(z)


def _tanh_d1(z):
    t = tape.tanh(z)
    return 1.0 - t * t


def _tanh_d2(z):
    t = tape.tanh(z)
    return -2.0 * t * (1.0 - t * t)


def _sigmoid_d1(z):
    s = tape.sigmoid(z)
    return s * (1.0 - s)


def _sigmoid_d2(z):
    s = tape.sigmoid(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _relu_d1(z):
    return tape.Tensor((z.data > 0).astype(z.data.dtype))


def _relu_d2(z):
    return None  # identically zero off the kink


TANH = Activation("tanh", tape.tanh, _tanh_d1, _tanh_d2, _tanh_derivative, smooth=True)
SIGMOID = Activation("sigmoid", tape.sigmoid, _sigmoid_d1, _sigmoid_d2, _sigmoid_derivative, smooth=True)
SOFTPLUS = Activation("softplus", tape.softplus, tape.sigmoid, _sigmoid_d1, _softplus_derivative, smooth=True)
RELU = Activation("relu", tape.relu, _relu_d1, _relu_d2, _relu_derivative, smooth=False)

_REGISTRY = {a.name: a for a in (TANH, SIGMOID, SOFTPLUS, RELU)}


def get_activation(name_or_act):
    if isinstance(name_or_act, Activation):
        return name_or_act
    try:
        return _REGISTRY[str(name_or_act).lower()]
    except KeyError:
        raise ConfigError(f"unknown activation {name_or_act!r}; choose from {sorted(_REGISTRY)}") from None


def register_activation(act: Activation):
    """Make a user-supplied smooth activation available by name (e.g. for checkpoints)."""
    _REGISTRY[act.name] = act
    return act
