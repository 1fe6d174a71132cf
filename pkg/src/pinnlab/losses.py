"""AD-PINN, FD-PINN and plain finite-difference loss functionals.

Every public ``*_loss`` returns a :class:`LossBreakdown` of floats.  The
matching ``*_objective`` builders return tape tensors so the same
expressions can be differentiated during training.

Residual forms
--------------
An AD residual form is a callable ``fn(Z, jet) -> Tensor (B, c)`` where
``jet`` is the network jet at the batch ``Z`` (see :mod:`pinnlab.network`).
Its ``order`` attribute (default 2) says how many input derivatives it
needs; wrap plain functions with :func:`residual_form`.

A discrete residual maps the network values at its ``nodes`` to interior
and boundary residual rows, see :class:`LinearStencilResidual` and
:class:`StencilResidual`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import tape
from .errors import DimensionMismatch, NonFinite, StencilOutOfRange, UnsupportedExponent


@dataclass(frozen=True)
class LossWeights:
    alpha_F: float = 1.0
    alpha_B: float = 1.0
    alpha_D: float = 1.0
    nu: int = 2
    alpha_theta: float = 0.0
    q: int = 2

    def __post_init__(self):
        for name in ("alpha_F", "alpha_B", "alpha_D", "alpha_theta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.nu not in (1, 2):
            raise UnsupportedExponent(f"nu must be 1 or 2, got {self.nu}")

    def scaled(self, s):
        return LossWeights(s * self.alpha_F, s * self.alpha_B, s * self.alpha_D, self.nu,
                           self.alpha_theta, self.q)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    pde: float = 0.0
    boundary: float = 0.0
    data: float = 0.0
    ridge: float = 0.0

    def to_row(self, iteration=None):
        row = asdict(self)
        if iteration is not None:
            row = {"iteration": iteration, **row}
        return row


@dataclass(frozen=True)
class ResidualForm:
    fn: Callable
    order: int = 2

    def __call__(self, Z, jet):
        return self.fn(Z, jet)


def residual_form(fn, order=2):
    return ResidualForm(fn, order)


def _order(form):
    return getattr(form, "order", 2)


def _term(r, weights, nu):
    """sum_z w_z |r(z)|_nu^nu for a residual tensor of shape (B, c)."""
    if r.ndim == 1:
        r = r.reshape(-1, 1)
    per_point = (r * r).sum(axis=1) if nu == 2 else tape.absolute(r).sum(axis=1)
    return (per_point * tape.Tensor(np.asarray(weights, dtype=r.data.dtype))).sum()


def _zero():
    return tape.Tensor(np.array(0.0))


def _breakdown(terms):
    vals = {k: float(v.data) for k, v in terms.items()}
    if not all(np.isfinite(v) for v in vals.values()):
        raise NonFinite(f"non-finite loss terms: {vals}")
    return LossBreakdown(**vals)


def _assemble(pde, boundary, data, ridge=None):
    total = pde + boundary + data
    terms = {"pde": pde, "boundary": boundary, "data": data}
    if ridge is not None:
        total = total + ridge
        terms["ridge"] = ridge
    terms["total"] = total
    return total, terms


# ---------------------------------------------------------------------------
# AD-PINN
# ---------------------------------------------------------------------------

def adpinn_objective(model, colloc, F_res, B_res, w: LossWeights = LossWeights()):
    """Tensor total and term dict of the AD-PINN functional."""
    pde = boundary = data = _zero()
    if w.alpha_F and colloc.n_interior:
        Z = colloc.interior
        jet = model.jet(Z, order=_order(F_res))
        pde = w.alpha_F * _term(F_res(Z, jet), colloc.weight_interior, w.nu)
    if w.alpha_B and colloc.n_boundary and B_res is not None:
        Z = colloc.boundary
        jet = model.jet(Z, order=_order(B_res))
        boundary = w.alpha_B * _term(B_res(Z, jet), colloc.weight_boundary, w.nu)
    if w.alpha_D and len(colloc.data_points):
        u = model.value(colloc.data_points)
        data = w.alpha_D * _term(u - colloc.data_targets, colloc.weight_data, w.nu)
    return _assemble(pde, boundary, data)


def adpinn_loss(model, colloc, F_res, B_res, w: LossWeights = LossWeights()) -> LossBreakdown:
    _, terms = adpinn_objective(model, colloc, F_res, B_res, w)
    return _breakdown(terms)


# ---------------------------------------------------------------------------
# discrete residuals
# ---------------------------------------------------------------------------

class StencilResidual:
    """A discrete residual ``U -> (F rows, B rows)`` on a fixed node list.

    ``fn(U)`` receives the node values as a tensor of shape ``(n_nodes, c)``
    and returns two tensors ``(n_F, c_F)`` and ``(n_B, c_B)`` (the second
    may be ``None``).
    """

    def __init__(self, nodes, fn, n_interior_rows, n_boundary_rows=0,
                 weight_interior=None, weight_boundary=None, channels=1):
        self.nodes = np.asarray(nodes, dtype=float)
        self.fn = fn
        self.channels = channels
        self.weight_interior = (np.full(n_interior_rows, 1.0 / n_interior_rows)
                                if weight_interior is None else np.asarray(weight_interior))
        self.weight_boundary = (np.full(n_boundary_rows, 1.0 / max(n_boundary_rows, 1))
                                if weight_boundary is None else np.asarray(weight_boundary))

    def __call__(self, U):
        return self.fn(U)


class LinearStencilResidual(StencilResidual):
    """Residual rows ``A_F U - b_F`` and ``A_B U - b_B`` with sparse matrices."""

    def __init__(self, nodes, A_F, b_F, A_B=None, b_B=None, weight_interior=None, weight_boundary=None):
        self.A_F = sp.csr_matrix(A_F)
        self.b_F = np.asarray(b_F, dtype=float).reshape(self.A_F.shape[0], -1)
        self.A_B = None if A_B is None else sp.csr_matrix(A_B)
        self.b_B = None if A_B is None else np.asarray(b_B, dtype=float).reshape(self.A_B.shape[0], -1)
        nB = 0 if A_B is None else self.A_B.shape[0]
        super().__init__(nodes, self._apply, self.A_F.shape[0], nB, weight_interior, weight_boundary)

    def _apply(self, U):
        F = tape.spmatmul(self.A_F, U) - self.b_F
        B = None if self.A_B is None else tape.spmatmul(self.A_B, U) - self.b_B
        return F, B


def _as_tensor2d(u):
    t = tape.as_tensor(u)
    return t.reshape(-1, 1) if t.ndim == 1 else t


def _data_term(U, data, w):
    if data is None or not w.alpha_D:
        return _zero()
    index, targets, *rest = data
    weights = rest[0] if rest else np.full(len(index), 1.0 / len(index))
    targets = np.asarray(targets, dtype=float).reshape(len(index), -1)
    return w.alpha_D * _term(U[np.asarray(index)] - targets, weights, w.nu)


def discrete_objective(U, D_res, w: LossWeights = LossWeights(), data=None):
    """Tensor total and terms of the discrete functional at node values ``U``.

    ``data`` is ``None`` or ``(node_indices, targets[, weights])``.
    """
    U = _as_tensor2d(U)
    F, B = D_res(U)
    pde = w.alpha_F * _term(F, D_res.weight_interior, w.nu) if w.alpha_F else _zero()
    boundary = w.alpha_B * _term(B, D_res.weight_boundary, w.nu) if (B is not None and w.alpha_B) else _zero()
    return _assemble(pde, boundary, _data_term(U, data, w))


def fd_loss(u, D_res, data=None, w: LossWeights = LossWeights()) -> LossBreakdown:
    """The finite-difference functional evaluated on a raw vector of node values."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != len(D_res.nodes) or u.size % len(D_res.nodes):
        raise DimensionMismatch(f"got {u.shape[0]} values for {len(D_res.nodes)} stencil nodes")
    _, terms = discrete_objective(tape.Tensor(u), D_res, w, data)
    return _breakdown(terms)


def check_stencil_nodes(colloc, D_res):
    """Raise StencilOutOfRange unless every stencil node is a collocation node."""
    known = colloc.nodes if colloc.nodes is not None else colloc.all_points()
    have = {tuple(p) for p in np.asarray(known)}
    missing = [p for p in D_res.nodes if tuple(p) not in have]
    if missing:
        raise StencilOutOfRange(f"{len(missing)} stencil nodes are not collocation nodes, e.g. {missing[0]}")


def fdpinn_objective(model, D_res, w: LossWeights = LossWeights(), data=None):
    """Tensor total and terms of the FD-PINN functional (network sampled at the stencil nodes)."""
    return discrete_objective(model.value(D_res.nodes), D_res, w, data)


def fdpinn_loss(model, colloc, D_res, w: LossWeights = LossWeights(), data=None) -> LossBreakdown:
    if colloc is not None:
        check_stencil_nodes(colloc, D_res)
    _, terms = fdpinn_objective(model, D_res, w, data)
    return _breakdown(terms)


# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------

def ridge_penalty(theta, w: LossWeights):
    """``alpha_theta * |theta|_q`` (a norm, not its power).  Accepts arrays or tensors."""
    if w.q not in (1, 2):
        raise UnsupportedExponent(f"q must be 1 or 2, got {w.q}")
    if isinstance(theta, tape.Tensor):
        norm = tape.absolute(theta).sum() if w.q == 1 else tape.sqrt((theta * theta).sum())
        return w.alpha_theta * norm
    theta = np.asarray(theta, dtype=float)
    norm = np.abs(theta).sum() if w.q == 1 else np.sqrt(theta @ theta)
    return float(w.alpha_theta * norm)
