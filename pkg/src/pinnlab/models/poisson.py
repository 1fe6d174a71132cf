"""Poisson problem -Δu = 1 on the slit square with homogeneous Dirichlet data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .. import tape
from ..linalg import conjugate_gradient
from ..losses import LinearStencilResidual, residual_form
from ..network import MultiplicativeMask


@dataclass
class DiscreteSystem:
    """``A u = b`` over all grid nodes plus its interior (Dirichlet-eliminated) block.

    Interior rows hold the 5-point stencil; boundary rows are identity rows
    with zero right-hand side.  ``reduced_matrix`` is the SPD interior block.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    interior_index: np.ndarray
    boundary_index: np.ndarray
    nodes: np.ndarray
    h: float

    @property
    def reduced_matrix(self):
        return self.matrix[self.interior_index][:, self.interior_index].tocsr()

    @property
    def reduced_rhs(self):
        # boundary values are zero, so elimination leaves the rhs unchanged
        return self.rhs[self.interior_index]

    def rows(self):
        """Yield ``(equation_index, [(node, coefficient), ...], rhs)`` per row."""
        A = self.matrix
        for k in range(A.shape[0]):
            lo, hi = A.indptr[k], A.indptr[k + 1]
            yield k, list(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist())), float(self.rhs[k])

    def residual(self, u):
        return self.matrix @ u - self.rhs


def assemble_poisson_slit(grid, colloc, rhs_value=1.0) -> DiscreteSystem:
    nx, ny = grid.shape
    h = grid.spacing[0]
    N = nx * ny
    is_boundary = np.zeros(N, dtype=bool)
    is_boundary[colloc.boundary_index] = True
    rows, cols, vals = [], [], []
    inv_h2 = 1.0 / (h * h)
    for k in colloc.interior_index:
        i, j = divmod(int(k), ny)
        rows.append(k)
        cols.append(k)
        vals.append(4.0 * inv_h2)
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rows.append(k)
            cols.append((i + di) * ny + (j + dj))
            vals.append(-inv_h2)
    for k in colloc.boundary_index:
        rows.append(k)
        cols.append(k)
        vals.append(1.0)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    b = np.where(is_boundary, 0.0, rhs_value)
    return DiscreteSystem(A, b, np.asarray(colloc.interior_index), np.asarray(colloc.boundary_index),
                          grid.points(), h)


def solve_poisson_fdm(system: DiscreteSystem, tol=1e-10):
    """Conjugate-gradient solve of the interior block; returns values at all nodes."""
    A = system.reduced_matrix
    b = system.reduced_rhs
    u = np.zeros(system.matrix.shape[0])
    if not np.any(b):
        return u
    x, _, _ = conjugate_gradient(lambda v: A @ v, b, tol=tol)
    u[system.interior_index] = x
    return u


def poisson_fd_residual(system: DiscreteSystem):
    """FD-PINN residual: interior stencil rows and boundary identity rows."""
    A = system.matrix
    I, Bd = system.interior_index, system.boundary_index
    return LinearStencilResidual(system.nodes, A[I], system.rhs[I], A[Bd], system.rhs[Bd])


def _poisson_interior(Z, jet):
    H = jet.hess  # (B, d, d, c)
    return -(H[:, 0, 0, :] + H[:, 1, 1, :]) - 1.0


def _poisson_boundary(Z, jet):
    return jet.val


poisson_residual_ad = residual_form(_poisson_interior, order=2)
poisson_boundary_ad = residual_form(_poisson_boundary, order=0)


def slit_distance_jet(Z):
    """Distance to the segment [0, 1] x {0} with its gradient and Hessian."""
    x, y = Z[:, 0], Z[:, 1]
    B = len(Z)
    val = np.empty(B)
    grad = np.zeros((B, 2))
    hess = np.zeros((B, 2, 2))
    mid = (x >= 0) & (x <= 1)
    val[mid] = np.abs(y[mid])
    grad[mid, 1] = np.sign(y[mid])
    side = ~mid
    ax = np.where(x < 0, x, x - 1.0)[side]
    ay = y[side]
    r = np.hypot(ax, ay)
    val[side] = r
    gx, gy = ax / r, ay / r
    grad[side, 0], grad[side, 1] = gx, gy
    hess[side, 0, 0] = (1 - gx * gx) / r
    hess[side, 1, 1] = (1 - gy * gy) / r
    hess[side, 0, 1] = hess[side, 1, 0] = -gx * gy / r
    return val, grad, hess


def slit_mask_jet(Z, order=2):
    """m(x, y) = (1 - x^2)(1 - y^2) * dist((x, y), slit), in network jet layout."""
    Z = np.asarray(Z, dtype=float)
    x, y = Z[:, 0], Z[:, 1]
    qx, qy = 1 - x * x, 1 - y * y
    q = qx * qy
    gq = np.stack([-2 * x * qy, -2 * y * qx], axis=1)
    hq = np.empty((len(Z), 2, 2))
    hq[:, 0, 0] = -2 * qy
    hq[:, 1, 1] = -2 * qx
    hq[:, 0, 1] = hq[:, 1, 0] = 4 * x * y
    r, gr, hr = slit_distance_jet(Z)
    val = q * r
    grad = gq * r[:, None] + q[:, None] * gr
    hess = (hq * r[:, None, None] + gq[:, :, None] * gr[:, None, :] + gr[:, :, None] * gq[:, None, :]
            + q[:, None, None] * hr)
    return val[:, None], grad[:, :, None], hess[:, :, :, None]


SLIT_MASK = MultiplicativeMask(slit_mask_jet)
