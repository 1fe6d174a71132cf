"""Adam with best-iterate tracking."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import tape
from .errors import NonFiniteGradient, NonFiniteLoss
from .losses import LossWeights, ridge_penalty


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    log_every: int = 100
    ridge: Optional[tuple] = None  # (alpha_theta, q)
    checkpoint_every: int = 0
    checkpoint_path: Optional[str] = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(theta, grad, state: AdamState, config: TrainConfig = TrainConfig()):
    """One bias-corrected Adam update; returns ``(theta', state')``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != np.shape(theta):
        raise ValueError("gradient and parameter shapes differ")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("non-finite gradient passed to adam_step")
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.t + 1
    m = b1 * state.m + (1 - b1) * grad
    v = b2 * state.v + (1 - b2) * grad * grad
    m_hat = m / (1 - b1 ** t)
    v_hat = v / (1 - b2 ** t)
    theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return theta, AdamState(m, v, t)


@dataclass
class TrainResult:
    best_network: object
    best_loss: float
    best_iteration: int
    loss_history: np.ndarray  # best-so-far after each evaluation
    raw_loss_history: np.ndarray
    log_rows: list = field(default_factory=list)

    @property
    def best_theta(self):
        return self.best_network.to_flat()


class ParameterBundle:
    """A network plus extra trainable scalars appended to its flat parameters.

    Objectives receive ``(bound_network, scalars_tensor)``.
    """

    def __init__(self, net, scalars):
        self.net = net
        self.scalars = np.asarray(scalars, dtype=float)

    @property
    def n_params(self):
        return self.net.n_params + self.scalars.size

    def to_flat(self):
        return np.concatenate([self.net.to_flat(), self.scalars])

    def with_flat(self, theta):
        k = self.net.n_params
        return ParameterBundle(self.net.with_flat(theta[:k]), theta[k:].copy())

    def bind(self, theta):
        k = self.net.n_params
        return self.net.bind(theta[:k]), theta[k:]


def _evaluate(model, objective, theta):
    theta_t = tape.Tensor(theta.copy(), requires_grad=True)
    out = objective(model.bind(theta_t))
    terms = None
    if isinstance(out, tuple):
        out, terms = out
    return theta_t, out, terms


def train(model, objective: Callable, config: TrainConfig = TrainConfig(), log_path=None, callback=None):
    """Full-batch Adam on ``objective(model.bind(theta))``.

    The objective may return a scalar tensor or ``(scalar, terms_dict)``.
    Each iteration evaluates the loss and gradient at the current
    parameters, records the network if the loss is strictly smaller than
    every earlier one, then takes a step; the final parameters are
    evaluated once more.  ``ridge=(alpha, q)`` adds ``alpha |theta_net|_q``.
    """
    theta = model.to_flat().astype(float)
    n_net = model.net.n_params if isinstance(model, ParameterBundle) else theta.size
    ridge_w = LossWeights(alpha_theta=config.ridge[0], q=config.ridge[1]) if config.ridge else None
    state = AdamState.zeros(theta.size)
    best_loss, best_theta, best_it = np.inf, theta.copy(), -1
    raw, best_hist, rows = [], [], []
    log_fh = open(log_path, "w", newline="") if log_path else None
    writer = None
    try:
        for it in range(config.iterations + 1):
            theta_t, loss, terms = _evaluate(model, objective, theta)
            if ridge_w is not None:
                loss = loss + ridge_penalty(theta_t[:n_net], ridge_w)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NonFiniteLoss(it, value)
            raw.append(value)
            if value < best_loss:
                best_loss, best_theta, best_it = value, theta.copy(), it
            best_hist.append(best_loss)
            if config.log_every and (it % config.log_every == 0 or it == config.iterations):
                row = {"iteration": it, "raw_loss": value, "best_loss": best_loss}
                if terms:
                    row.update({k: float(v.data) for k, v in terms.items() if k != "total"})
                rows.append(row)
                if log_fh is not None:
                    if writer is None:
                        writer = csv.DictWriter(log_fh, fieldnames=list(row))
                        writer.writeheader()
                    writer.writerow(row)
            if callback is not None:
                callback(it, value, theta)
            if config.checkpoint_every and config.checkpoint_path and it and it % config.checkpoint_every == 0:
                net = model.with_flat(best_theta)
                getattr(net, "net", net).save(config.checkpoint_path)
            if it == config.iterations:
                break
            loss.backward()
            grad = theta_t.grad
            if grad is None:
                grad = np.zeros_like(theta)
            theta, state = adam_step(theta, grad, state, config)
    finally:
        if log_fh is not None:
            log_fh.close()
    return TrainResult(model.with_flat(best_theta), best_loss, best_it, np.array(best_hist), np.array(raw), rows)
