"""Witness networks: networks that vanish (with derivatives) on a point set but not elsewhere.

Adding ``lam * Phi`` to any network leaves every collocation-based loss
unchanged, which certifies that such losses have infinitely many minimizers.
Two constructions are provided:

* a smooth ridge witness ``Phi(z) = lam * g(...g(psi(v.z))) * v`` where
  ``psi`` is a one-hidden-layer 1D Hermite interpolant with zero data at the
  projected collocation points, and
* a ReLU tent supported in a small max-norm ball around ``z0``.

It also contains value interpolation through a 1D ridge (the constructive
side of grid equivalence) and the two hand-built minimizers of a ReLU
first-order ODE problem.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .activations import RELU, get_activation
from .autodiff import eval_jet2
from .errors import (BallIntersectsCollocation, ConfigError, DuplicateAbscissa, ExhaustedRetries,
                     IllConditioned, InvalidRegime, WrongActivation)
from .losses import LossWeights, adpinn_loss, residual_form
from .collocation import CollocationSet
from .network import Network, deepen_relu_identity, linear_combine


# ---------------------------------------------------------------------------
# hyperplanes and projection directions
# ---------------------------------------------------------------------------

@dataclass
class HyperplaneFamily:
    directions: np.ndarray
    abscissae: np.ndarray
    offsets: Optional[np.ndarray] = None
    block_map: Optional[dict] = None
    min_abs_det: float = float("nan")
    subsets_checked: int = 0


def vandermonde_directions(count, d, t, offsets=None, seed=0, max_subsets=2000):
    """Directions ``(1, t_j, ..., t_j^(d-1))``; any ``d`` of them are linearly independent.

    Every ``d``-subset determinant is checked when ``count <= 12``,
    otherwise a seeded random sample of subsets.
    """
    t = np.asarray(t, dtype=float)
    if t.size != count:
        raise ConfigError(f"need {count} abscissae, got {t.size}")
    if np.unique(t).size != t.size:
        raise DuplicateAbscissa("abscissae must be pairwise distinct")
    V = np.vander(t, d, increasing=True)
    if count < d:
        return HyperplaneFamily(V, t, offsets, min_abs_det=float("nan"), subsets_checked=0)
    if count <= 12:
        subsets = itertools.combinations(range(count), d)
    else:
        rng = np.random.default_rng(seed)
        subsets = (tuple(sorted(rng.choice(count, d, replace=False))) for _ in range(max_subsets))
    dets = [abs(np.linalg.det(V[list(s)])) for s in subsets]
    return HyperplaneFamily(V, t, offsets, min_abs_det=float(min(dets)), subsets_checked=len(dets))


def _min_gap(proj):
    s = np.sort(proj)
    return float(np.min(np.diff(s))) if s.size > 1 else np.inf


def choose_projection_direction(points, seed=0, max_draws=1000, candidates=1, rel_gap=1e-9):
    """Random unit direction whose projections of ``points`` are pairwise separated.

    A draw is accepted when the minimum gap between projections exceeds
    ``rel_gap`` times the bounding-box diameter.  With ``candidates > 1``
    the best of that many accepted draws (largest gap) is returned.
    Returns ``(direction, min_gap)``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    d = points.shape[1]
    if d == 1:
        gap = _min_gap(points[:, 0])
        if gap <= 0:
            raise ExhaustedRetries("duplicate points")
        return np.ones(1), gap
    diameter = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    rng = np.random.default_rng(seed)
    best, best_gap, accepted = None, -1.0, 0
    for _ in range(max_draws):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        gap = _min_gap(points @ v)
        if gap > rel_gap * diameter:
            accepted += 1
            if gap > best_gap:
                best, best_gap = v, gap
            if accepted >= candidates:
                break
    if best is None:
        raise ExhaustedRetries(f"no separating direction in {max_draws} draws")
    return best, best_gap


# ---------------------------------------------------------------------------
# 1D Hermite null interpolant
# ---------------------------------------------------------------------------

@dataclass
class HermiteSpec:
    """Zero conditions up to order ``r_F`` at ``t_interior`` and ``r_B`` at ``t_boundary``; value at ``t0``."""

    t_interior: np.ndarray
    t_boundary: np.ndarray
    r_F: int
    r_B: int
    t0: float
    anchor_value: float = 1.0

    def conditions(self):
        conds = [(float(t), k) for t in np.ravel(self.t_interior) for k in range(self.r_F + 1)]
        conds += [(float(t), k) for t in np.ravel(self.t_boundary) for k in range(self.r_B + 1)]
        conds.append((float(self.t0), 0))
        return conds

    @property
    def ell(self):
        return np.size(self.t_interior) * (self.r_F + 1) + np.size(self.t_boundary) * (self.r_B + 1)


@dataclass
class HermiteReport:
    shift: float
    condition_number: float
    attempts: int
    max_residual: float
    residuals: np.ndarray


def _choose_shift(act, max_order, candidates=(0.5, 0.3, 0.7, 1.0, 0.2), floor=1e-3):
    for a in candidates:
        if all(abs(act.derivative(np.array(a), k)) > floor for k in range(max_order + 1)):
            return a
    raise ConfigError(f"no shift with nonvanishing derivatives up to order {max_order} for {act.name}")


def _condition_estimate(M, lu):
    """1-norm condition number estimate from an LU factorization (LAPACK gecon)."""
    anorm = np.max(np.sum(np.abs(M), axis=0))
    rcond, info = sla.lapack.dgecon(lu[0], anorm, norm="1")
    return np.inf if rcond == 0 else 1.0 / rcond


def build_hermite_1d(spec: HermiteSpec, activation="tanh", shift=None, seed=0, kappa=4.0,
                     max_condition=1e12, retries=20, return_report=False):
    """One hidden layer, ``ell + 1`` units, zero Hermite data at the nodes and value at ``t0``.

    Each abscissa owns as many units as it has conditions.  A unit owned by
    abscissa ``tau`` with local spacing ``delta`` gets slope
    ``w ~ kappa / delta`` and a bias putting its argument near the shift
    ``a`` at ``tau``.  Output weights solve the square (row-scaled) system;
    fresh slopes are drawn when the scaled condition number exceeds
    ``max_condition``.
    """
    act = get_activation(activation)
    if not act.smooth:
        raise WrongActivation("Hermite interpolation needs a smooth activation")
    conds = spec.conditions()
    taus = np.array([c[0] for c in conds])
    orders = np.array([c[1] for c in conds])
    uniq = np.unique(taus)
    n_pts = np.size(spec.t_interior) + np.size(spec.t_boundary) + 1
    if uniq.size != n_pts:
        raise DuplicateAbscissa("projected abscissae (including t0) must be pairwise distinct")
    a = shift if shift is not None else _choose_shift(act, int(orders.max()))
    gaps = np.diff(uniq)
    left = np.concatenate([[np.inf], gaps])
    right = np.concatenate([gaps, [np.inf]])
    local = np.minimum(left, right)
    if uniq.size == 1:
        local = np.ones(1)
    delta = local[np.searchsorted(uniq, taus)]
    scale = kappa / delta
    row_scale = scale ** (-orders.astype(float))
    rng = np.random.default_rng(seed)
    n = len(conds)
    best = None
    for attempt in range(1, retries + 1):
        w = scale * rng.uniform(0.6, 1.4, n)
        args = a + rng.uniform(-0.25, 0.25, n)
        beta = args - w * taus
        M = np.empty((n, n))
        for k in np.unique(orders):
            rows = orders == k
            M[rows] = (w ** k)[None, :] * act.derivative(np.outer(taus[rows], w) + beta[None, :], int(k))
        Ms = M * row_scale[:, None]
        lu = sla.lu_factor(Ms, check_finite=False)
        cond = _condition_estimate(Ms, lu)
        if best is None or cond < best[0]:
            best = (cond, w, beta, lu)
        if cond <= max_condition:
            break
    cond, w, beta, lu = best
    if cond > max_condition:
        raise IllConditioned(f"condition number {cond:.3e} after {retries} attempts")
    rhs = np.zeros(n)
    rhs[-1] = spec.anchor_value * row_scale[-1]
    c = sla.lu_solve(lu, rhs, check_finite=False)
    net = Network((w[:, None], c[None, :]), (beta, np.zeros(1)), act)
    if not return_report:
        return net
    resid = hermite_residuals(net, spec)
    return net, HermiteReport(a, float(cond), attempt, float(np.max(np.abs(resid))), resid)


def hermite_residuals(net, spec: HermiteSpec):
    """Direct evaluation of every Hermite condition (target subtracted)."""
    act = net.activation
    w = net.weights[0][:, 0]
    beta = net.biases[0]
    c = net.weights[1][0]
    out = []
    for i, (t, k) in enumerate(spec.conditions()):
        val = np.sum(c * w ** k * act.derivative(w * t + beta, k))
        if k == 0:
            val += net.biases[1][0]
        target = spec.anchor_value if i == len(spec.conditions()) - 1 else 0.0
        out.append(val - target)
    return np.array(out)


# ---------------------------------------------------------------------------
# witness networks
# ---------------------------------------------------------------------------

@dataclass
class WitnessNetwork:
    net: Network
    conditions: list
    anchor: tuple
    tolerance: float
    meta: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return max((c[2] for c in self.conditions), default=0.0)

    @property
    def certified(self):
        return self.max_residual <= self.tolerance and abs(self.anchor[2] - self.anchor[1]).max() <= self.tolerance

    def report(self):
        return {
            "certified": bool(self.certified),
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "conditions": [{"set": s, "order": k, "max_abs": r} for s, k, r in self.conditions],
            "anchor": {"z0": list(map(float, self.anchor[0])), "target": list(map(float, self.anchor[1])),
                       "achieved": list(map(float, self.anchor[2]))},
            "widths": list(self.net.widths),
            "n_params": int(self.net.n_params),
            **self.meta,
        }


def _certify_jets(net, colloc, r_F, r_B):
    """Max |D^beta Phi| over interior (|beta| <= r_F) and boundary (|beta| <= r_B) points, orders <= 2."""
    out = []
    for label, pts, r in (("interior", colloc.interior, r_F), ("boundary", colloc.boundary, r_B)):
        if len(pts) == 0:
            continue
        order = min(r, 2)
        jet = net.jet(pts, order=order)
        parts = [jet.val, jet.grad, jet.hess][: order + 1]
        for k, part in enumerate(parts):
            out.append((label, k, float(np.max(np.abs(part.data)))))
    return out


def smooth_witness_widths(d, c, L, ell):
    """Widths of the smooth witness and its parameter count."""
    d1 = ell + 1
    widths = [d, d1] + [2] * (L - 2) + [c]
    return widths, sum(o * (i + 1) for i, o in zip(widths[:-1], widths[1:]))


def build_null_witness_smooth(colloc: CollocationSet, r_F, r_B, z0, v, L=2, activation="tanh", seed=0,
                              a_g=1.0, tolerance=1e-6, direction_candidates=16, **hermite_kw):
    """Depth-``L`` smooth network with vanishing jets on the collocation set and ``Phi(z0) = v``."""
    act = get_activation(activation)
    if L > 2 and not act.monotone:
        raise ConfigError("composition depth > 2 needs a strictly monotone activation")
    if L < 2:
        raise ConfigError("smooth witness needs depth >= 2")
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    pts = np.vstack([colloc.interior, colloc.boundary, z0[None, :]])
    direction, gap = choose_projection_direction(pts, seed=seed, candidates=direction_candidates)
    spec = HermiteSpec(colloc.interior @ direction, colloc.boundary @ direction, r_F, r_B, float(z0 @ direction))
    psi, hreport = build_hermite_1d(spec, act, seed=seed, return_report=True, **hermite_kw)
    d, c = z0.size, v.size
    w1 = psi.weights[0][:, 0]
    W1 = np.outer(w1, direction)
    b1 = psi.biases[0]
    coef = psi.weights[1][0]
    if L == 2:
        Ws, bs = [W1, np.outer(v, coef)], [b1, np.zeros(c)]
    else:
        # g(t) = sigma(a_g t) - sigma(0): the second neuron of each layer outputs sigma(0)
        Ws = [W1, np.vstack([a_g * coef, np.zeros_like(coef)])]
        bs = [b1, np.zeros(2)]
        for _ in range(L - 3):
            Ws.append(np.array([[a_g, -a_g], [0.0, 0.0]]))
            bs.append(np.zeros(2))
        Ws.append(np.outer(v, [1.0, -1.0]))
        bs.append(np.zeros(c))
    raw = Network(tuple(Ws), tuple(bs), act, seed)
    # normalize so that Phi(z0) = v: divide by the scalar profile at z0
    k = int(np.argmax(np.abs(v)))
    lam = v[k] / raw(z0)[k]
    Ws[-1] = Ws[-1] * lam
    net = Network(tuple(Ws), tuple(bs), act, seed)
    conds = _certify_jets(net, colloc, r_F, r_B)
    widths, m_formula = smooth_witness_widths(d, c, L, spec.ell)
    meta = {
        "construction": "smooth-ridge",
        "activation": act.name,
        "direction": direction.tolist(),
        "min_projection_gap": gap,
        "hermite_shift": hreport.shift,
        "hermite_condition_number": hreport.condition_number,
        "hermite_max_residual": hreport.max_residual,
        "normalization": float(lam),
        "expected_widths": widths,
        "expected_n_params": m_formula,
    }
    return WitnessNetwork(net, conds, (z0, v, net(z0)), tolerance, meta)


def _ball_check(points, z0, eps):
    dist = np.max(np.abs(points - z0[None, :]), axis=1)
    if np.any(dist <= eps):
        i = int(np.argmin(dist))
        raise BallIntersectsCollocation(f"point {points[i].tolist()} lies within max-norm distance {eps} of z0")


def relu_tent_network(z0, v, epsilon):
    """ReLU(1 - max_i |z_i - z0_i| / eps) * v via a pairwise max tree."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = z0.size
    # layer 1: relu(+(z - z0)/eps), relu(-(z - z0)/eps)
    W = np.zeros((2 * d, d))
    W[0::2] = np.eye(d) / epsilon
    W[1::2] = -np.eye(d) / epsilon
    b = np.empty(2 * d)
    b[0::2] = -z0 / epsilon
    b[1::2] = z0 / epsilon
    Ws, bs = [W], [b]
    n_prev = 2 * d
    # each value is a coefficient vector over the previous layer's outputs; |t| = relu(t) + relu(-t)
    values = []
    for i in range(d):
        e = np.zeros(n_prev)
        e[2 * i] = e[2 * i + 1] = 1.0
        values.append(e)
    while len(values) > 1:
        rows, new_values = [], []
        for j in range(0, len(values) - 1, 2):
            a_, b_ = values[j], values[j + 1]
            rows.append(a_ - b_)  # relu(a - b)
            rows.append(b_)  # relu(b) = b since b >= 0
            new_values.append((len(rows) - 2, len(rows) - 1))
        if len(values) % 2:
            rows.append(values[-1])
            new_values.append((len(rows) - 1,))
        Wm = np.array(rows)
        Ws.append(Wm)
        bs.append(np.zeros(len(rows)))
        values = []
        for idx in new_values:
            e = np.zeros(len(rows))
            e[list(idx)] = 1.0
            values.append(e)
    Ws.append(-values[0][None, :])
    bs.append(np.ones(1))
    Ws.append(v[:, None].copy())
    bs.append(np.zeros(v.size))
    return Network(tuple(Ws), tuple(bs), RELU)


def build_null_witness_relu(colloc: CollocationSet, z0, v, epsilon, L_target=None):
    """ReLU tent witness, identically zero outside the max-norm ball of radius ``epsilon`` around ``z0``."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    pts = np.vstack([colloc.interior, colloc.boundary] + ([colloc.data_points] if len(colloc.data_points) else []))
    _ball_check(pts, z0, epsilon)
    net = relu_tent_network(z0, v, epsilon)
    built_depth = net.depth
    if L_target is not None:
        net = deepen_relu_identity(net, L_target)
    jets = _certify_jets(net, colloc, 2, 2)
    meta = {"construction": "relu-tent", "epsilon": float(epsilon), "construction_depth": built_depth,
            "depth": net.depth, "tree_depth_bound": int(np.ceil(np.log2(z0.size + 1))) + 1}
    return WitnessNetwork(net, jets, (z0, v, net(z0)), 0.0, meta)


# ---------------------------------------------------------------------------
# value interpolation through a ridge
# ---------------------------------------------------------------------------

def interpolate_values(points, targets, activation="relu", seed=0, direction_candidates=32,
                       max_condition=1e14, kappa=2.0):
    """One-hidden-layer network with ``len(points)`` units matching ``targets`` at ``points``.

    The points are projected on a separating direction and sorted.  ReLU
    units have knots at the midpoints between consecutive projections
    (plus one below the first), so the collocation system is lower
    triangular.  Smooth units are centred at the same knots with slope
    ``kappa / gap`` and solved densely.
    """
    act = get_activation(activation)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    targets = np.asarray(targets, dtype=float)
    squeeze = targets.ndim == 1
    Y = targets.reshape(len(points), -1)
    n, d = points.shape
    if n == 1:
        direction, gap = np.eye(d)[0], 1.0
    else:
        direction, gap = choose_projection_direction(points, seed=seed, candidates=direction_candidates)
    s = points @ direction
    order = np.argsort(s)
    ss = s[order]
    gaps = np.diff(ss)
    first = gaps.min() if n > 1 else 1.0
    knots = np.concatenate([[ss[0] - first / 2], 0.5 * (ss[1:] + ss[:-1])])
    if not act.smooth:
        M = np.maximum(ss[:, None] - knots[None, :], 0.0)
        C = sla.solve_triangular(M, Y[order], lower=True)
        w = np.ones(n)
        beta = -knots
    else:
        local = np.concatenate([[first], gaps])
        w = kappa / local
        beta = -w * knots
        M = act.numpy(np.outer(ss, w) + beta[None, :])
        cond = np.linalg.cond(M)
        if cond > max_condition:
            raise IllConditioned(f"interpolation matrix condition {cond:.3e}")
        C = np.linalg.solve(M, Y[order])
    W1 = np.outer(w, direction)
    net = Network((W1, C.T.copy()), (beta, np.zeros(Y.shape[1])), act, seed)
    return net


# ---------------------------------------------------------------------------
# certification of non-uniqueness
# ---------------------------------------------------------------------------

def _match_depth(u_hat, phi):
    if u_hat.depth == phi.depth:
        return u_hat, phi
    if phi.depth < u_hat.depth and phi.activation.name == RELU.name:
        return u_hat, deepen_relu_identity(phi, u_hat.depth)
    if u_hat.depth < phi.depth and u_hat.activation.name == RELU.name:
        return deepen_relu_identity(u_hat, phi.depth), phi
    raise ConfigError(f"cannot match depths {u_hat.depth} and {phi.depth}")


def certify_nonuniqueness(u_hat: Network, witness, loss_evaluator, lambdas=(-10, -1, -0.1, 0.1, 1, 10),
                          samples=None, rel_tol=None):
    """Loss of ``u_hat + lam * Phi`` versus ``u_hat`` for each ``lam``, plus off-collocation growth.

    ``loss_evaluator(network) -> float``.  ``samples`` are off-collocation
    points where ``max |(u_hat + lam Phi) - u_hat|`` is recorded.
    """
    phi = witness.net if isinstance(witness, WitnessNetwork) else witness
    u_hat, phi = _match_depth(u_hat, phi)
    base = float(loss_evaluator(u_hat))
    rows = []
    base_vals = u_hat(samples) if samples is not None else None
    for lam in lambdas:
        combo = linear_combine(u_hat, phi, 1.0, float(lam))
        val = float(loss_evaluator(combo))
        row = {"lambda": float(lam), "loss": val, "abs_diff": abs(val - base),
               "rel_diff": abs(val - base) / abs(base) if base != 0 else abs(val - base)}
        if samples is not None:
            row["offgrid_sup"] = float(np.max(np.abs(combo(samples) - base_vals)))
        rows.append(row)
    report = {
        "base_loss": base,
        "rows": rows,
        "max_abs_diff": max(r["abs_diff"] for r in rows),
        "max_rel_diff": max(r["rel_diff"] for r in rows),
    }
    if samples is not None:
        by_lam = {r["lambda"]: r["offgrid_sup"] for r in rows}
        if 1.0 in by_lam and 10.0 in by_lam and by_lam[1.0] > 0:
            report["offgrid_ratio_10_over_1"] = by_lam[10.0] / by_lam[1.0]
    if rel_tol is not None:
        report["passed"] = report["max_rel_diff"] <= rel_tol
    return report


def report_json(report, path=None):
    text = json.dumps(report, indent=2, sort_keys=True, default=float)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


# ---------------------------------------------------------------------------
# first-order ODE example
# ---------------------------------------------------------------------------

def _ode_residual(a):
    return residual_form(lambda Z, jet: jet.grad[:, 0, :] - a, order=1)


def _ode_boundary(u0):
    return residual_form(lambda Z, jet: jet.val - u0, order=0)


def example32_minimizers(a=1.0, u0=0.0, z=(0.25, 0.5, 0.75), nu=2):
    """Two ReLU networks solving u' = a at ``z`` and u(0) = u0 with zero loss, yet different.

    ``u(z) = relu(w z + u0) + relu(w z - b)`` with ``w = a / 2`` and
    ``b in {0, z_1 w / 2}``.  Returns ``(net_a, net_b, loss_a, loss_b)``.
    """
    z = np.asarray(z, dtype=float)
    if a <= 0 or u0 < 0 or np.any(z <= 0) or np.any(np.diff(z) <= 0):
        raise InvalidRegime("need a > 0, u0 >= 0 and increasing positive collocation points")
    w = a / 2.0
    colloc = CollocationSet(interior=z[:, None], boundary=np.zeros((1, 1)))
    weights = LossWeights(alpha_F=1.0, alpha_B=1.0, alpha_D=0.0, nu=nu)
    nets, losses = [], []
    for b in (0.0, z[0] * w / 2.0):
        net = Network((np.array([[w], [w]]), np.array([[1.0, 1.0]])), (np.array([u0, -b]), np.zeros(1)), RELU)
        nets.append(net)
        losses.append(adpinn_loss(net, colloc, _ode_residual(a), _ode_boundary(u0), weights).total)
    return nets[0], nets[1], losses[0], losses[1]
