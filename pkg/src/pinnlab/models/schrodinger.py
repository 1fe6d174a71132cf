"""Focusing cubic Schrödinger equation i ψ_t + 0.5 ψ_xx + |ψ|² ψ = 0 on a periodic interval.

Time is discretized by implicit Euler, space by central differences, with
the ghost identification x_{-1} = x_{N-1}.  Fields are stored on the full
lattice t_0..t_T, x_0..x_N as real and imaginary parts; the column x_N
repeats x_0 for the reference solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import tape
from ..collocation import build_interval_grid
from ..errors import FixedPointDiverged
from ..losses import StencilResidual
from ..network import AdditiveAnchor


@dataclass
class ComplexField:
    real: np.ndarray
    imag: np.ndarray

    @property
    def psi(self):
        return self.real + 1j * self.imag


def initial_profile(x):
    return 2.0 / np.cosh(x)


def _neighbors(N):
    j = np.arange(N)
    jm = np.where(j == 0, N - 1, j - 1)  # ghost x_{-1} := x_{N-1}
    jp = j + 1  # j = N - 1 reaches the stored column x_N
    return j, jm, jp


def schrodinger_residual_fd(a0, b0, a1, b1, h_t, h_x):
    """Real and imaginary parts of the residual for rows j = 0..N-1.

    ``a0, b0`` are the real/imag parts at t_k and ``a1, b1`` at t_{k+1},
    each of length N + 1 (columns x_0..x_N).  Works on arrays or tensors.
    """
    N = a0.shape[-1] - 1
    j, jm, jp = _neighbors(N)
    lap_a = (a1[..., jp] - 2.0 * a1[..., j] + a1[..., jm]) * (0.5 / (h_x * h_x))
    lap_b = (b1[..., jp] - 2.0 * b1[..., j] + b1[..., jm]) * (0.5 / (h_x * h_x))
    aj, bj = a1[..., j], b1[..., j]
    mod2 = aj * aj + bj * bj
    real = -(b1[..., j] - b0[..., j]) * (1.0 / h_t) + lap_a + mod2 * aj
    imag = (a1[..., j] - a0[..., j]) * (1.0 / h_t) + lap_b + mod2 * bj
    return real, imag


def schrodinger_residual_complex(psi0, psi1, h_t, h_x):
    """Complex-arithmetic evaluation of the same residual (independent route)."""
    N = psi0.shape[-1] - 1
    out = np.empty(N, dtype=complex)
    for j in range(N):
        left = psi1[N - 1] if j == 0 else psi1[j - 1]
        out[j] = (1j * (psi1[j] - psi0[j]) / h_t
                  + 0.5 * (psi1[j + 1] - 2 * psi1[j] + left) / h_x ** 2
                  + abs(psi1[j]) ** 2 * psi1[j])
    return out


def _periodic_laplacian(N, h_x):
    main = -2.0 * np.ones(N)
    off = np.ones(N - 1)
    L = sp.diags([off, main, off], [-1, 0, 1], shape=(N, N), format="lil")
    L[0, N - 1] = 1.0
    L[N - 1, 0] = 1.0
    return (L / (h_x * h_x)).tocsr()


def _step_residual(psi_new, psi_old, L, h_t):
    return 1j * (psi_new - psi_old) / h_t + 0.5 * (L @ psi_new) + np.abs(psi_new) ** 2 * psi_new


def _picard_step(psi, L, h_t, tol, maxiter):
    """Lagged nonlinearity: solve (i/h_t + 0.5 L) ψ⁺ = i ψ/h_t - |ψ*|²ψ* repeatedly."""
    N = psi.size
    M = (1j / h_t) * sp.identity(N, format="csc") + 0.5 * L.tocsc()
    lu = spla.splu(M.astype(complex))
    cur = psi.copy()
    res = np.inf
    for _ in range(maxiter):
        rhs = 1j * psi / h_t - np.abs(cur) ** 2 * cur
        cur = lu.solve(rhs)
        res = np.max(np.abs(_step_residual(cur, psi, L, h_t)))
        if not np.isfinite(res) or res > 1e8:
            return None, res
        if res <= tol:
            return cur, res
    return None, res


def _newton_step(psi, L, h_t, tol, maxiter):
    """Newton on the real 2N system for (a, b), with backtracking."""
    N = psi.size
    a0, b0 = psi.real, psi.imag
    Lh = 0.5 * L
    I = sp.identity(N, format="csr")

    def F(a, b):
        m = a * a + b * b
        return np.concatenate([-(b - b0) / h_t + Lh @ a + m * a, (a - a0) / h_t + Lh @ b + m * b])

    a, b = a0.copy(), b0.copy()
    r = F(a, b)
    res = np.max(np.abs(r))
    for _ in range(maxiter):
        if res <= tol:
            return a + 1j * b, res
        J11 = Lh + sp.diags(3 * a * a + b * b)
        J12 = -I / h_t + sp.diags(2 * a * b)
        J21 = I / h_t + sp.diags(2 * a * b)
        J22 = Lh + sp.diags(a * a + 3 * b * b)
        J = sp.bmat([[J11, J12], [J21, J22]], format="csc")
        delta = spla.spsolve(J, -r)
        step = 1.0
        while True:
            na, nb = a + step * delta[:N], b + step * delta[N:]
            nr = F(na, nb)
            nres = np.max(np.abs(nr))
            if (np.isfinite(nres) and nres < res) or step < 1e-4:
                break
            step *= 0.5
        if not np.isfinite(nres):
            return None, nres
        a, b, r, res = na, nb, nr, nres
    return (a + 1j * b, res) if res <= tol else (None, res)


def solve_schrodinger_fdm(N, T, tol=1e-10, method="auto", maxiter=200):
    """Reference trajectory of the implicit scheme.

    ``method`` is ``"picard"`` (lagged nonlinearity), ``"newton"`` or
    ``"auto"`` (Picard first, Newton when Picard stalls or diverges).
    Returns a :class:`ComplexField` with arrays of shape ``(T + 1, N + 1)``
    and the per-step maximum residuals.
    """
    if N < 2 or T < 2:
        raise ValueError("need N, T >= 2")
    grid = build_interval_grid(N, T)
    h_t, h_x = grid.spacing
    x = grid.axis(1)[:N]
    L = _periodic_laplacian(N, h_x)
    psi = initial_profile(x).astype(complex)
    out = np.empty((T + 1, N + 1), dtype=complex)
    out[0, :N] = psi
    residuals = np.empty(T)
    for k in range(T):
        new = res = None
        if method in ("picard", "auto"):
            new, res = _picard_step(psi, L, h_t, tol, maxiter)
        if new is None and method in ("newton", "auto"):
            new, res = _newton_step(psi, L, h_t, tol, maxiter)
        if new is None:
            raise FixedPointDiverged(k, f"step residual {res:.3e}")
        residuals[k] = res
        psi = new
        out[k + 1, :N] = psi
    out[:, N] = out[:, 0]
    return ComplexField(out.real.copy(), out.imag.copy()), residuals


# ---------------------------------------------------------------------------
# FD-PINN pieces
# ---------------------------------------------------------------------------

def schrodinger_fd_residual(N, T):
    """Discrete residual over the (T+1) x (N+1) lattice nodes (t-major order).

    Interior rows: the 2-channel residual for k = 0..T-1, j = 0..N-1.
    Boundary rows: the initial condition ψ(0, x_j) - 2 sech(x_j), j = 0..N.
    """
    grid = build_interval_grid(N, T)
    h_t, h_x = grid.spacing
    nodes = grid.points()
    x = grid.axis(1)
    ic = initial_profile(x)

    def fn(U):
        V = U.reshape(T + 1, N + 1, 2)
        a, b = V[:, :, 0], V[:, :, 1]
        re, im = schrodinger_residual_fd(a[:-1], b[:-1], a[1:], b[1:], h_t, h_x)
        F = tape.stack([re.reshape(-1), im.reshape(-1)], axis=1)
        B = tape.stack([a[0] - ic, b[0]], axis=1)
        return F, B

    return StencilResidual(nodes, fn, T * N, N + 1, channels=2)


def _anchor_jet(Z, order=2):
    x = Z[:, 1]
    B = len(Z)
    s = 1.0 / np.cosh(x)
    t = np.tanh(x)
    val = np.zeros((B, 2))
    val[:, 0] = 2 * s
    grad = np.zeros((B, 2, 2))
    grad[:, 1, 0] = -2 * s * t
    hess = np.zeros((B, 2, 2, 2))
    hess[:, 1, 1, 0] = 2 * s * (t * t - s * s)
    return val, grad, hess


def _time_scale_jet(Z, order=2):
    B = len(Z)
    grad = np.zeros((B, 2, 1))
    grad[:, 0, 0] = 1.0
    return Z[:, :1].copy(), grad, np.zeros((B, 2, 2, 1))


# ψ(t, x) = 2 sech(x) + t * net(t, x), channels (real, imag)
INITIAL_ANCHOR = AdditiveAnchor(_anchor_jet, _time_scale_jet)


def trajectory_to_nodes(field: ComplexField):
    """Stack a trajectory into node values ``(n_nodes, 2)`` in lattice order."""
    return np.stack([field.real.ravel(), field.imag.ravel()], axis=1)
