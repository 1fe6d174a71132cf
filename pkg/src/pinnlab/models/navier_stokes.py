"""Incompressible 2D Navier-Stokes on a periodic square: data generator and inverse-problem loss.

Arrays are indexed ``[i, j]`` with ``x = i h`` along axis 0 and ``y = j h``
along axis 1; trajectories add a leading time axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tape
from ..collocation import build_periodic_grid, core_subgrids
from ..errors import FixedPointDiverged
from ..linalg import conjugate_gradient


@dataclass
class FlowSnapshot:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    time_index: int
    lam1: float
    lam2: float


STREAM_MODES = ((1.00, 1, 1), (0.30, 2, 1), (0.20, 1, 2), (0.15, 2, 2))  # coefficient, kx, ky


# ---------------------------------------------------------------------------
# periodic stencils
# ---------------------------------------------------------------------------

def dx(f, h):
    return (np.roll(f, -1, axis=-2) - np.roll(f, 1, axis=-2)) / (2 * h)


def dy(f, h):
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2 * h)


def laplacian5(f, h):
    return (np.roll(f, -1, -2) + np.roll(f, 1, -2) + np.roll(f, -1, -1) + np.roll(f, 1, -1) - 4 * f) / (h * h)


def divergence(u, v, h):
    return dx(u, h) + dy(v, h)


def kinetic_energy(u, v, h):
    return 0.5 * h * h * float(np.sum(u * u + v * v))


def _null_modes(shape):
    """Orthonormal basis of fields with vanishing central gradient (parity modes)."""
    nx, ny = shape
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    modes = [np.ones(shape)]
    if nx % 2 == 0:
        modes.append((-1.0) ** I)
    if ny % 2 == 0:
        modes.append((-1.0) ** J)
    if nx % 2 == 0 and ny % 2 == 0:
        modes.append((-1.0) ** (I + J))
    return [m.ravel() / np.linalg.norm(m) for m in modes]


def _projector(modes):
    def project(r):
        for m in modes:
            r = r - (m @ r) * m
        return r
    return project


def streamfunction(X, Y):
    return sum(c * np.sin(kx * X) * np.cos(ky * Y) for c, kx, ky in STREAM_MODES)


def ns_initial_field(grid=None, lam1=1.0, lam2=0.1) -> FlowSnapshot:
    grid = grid or build_periodic_grid(32, 2 * np.pi)
    X, Y = grid.mesh()
    h = grid.spacing[0]
    psi = streamfunction(X, Y)
    return FlowSnapshot(dy(psi, h), -dx(psi, h), np.zeros_like(psi), 0, lam1, lam2)


def ns_generate_data(lam1=1.0, lam2=0.1, h_t=0.1, steps=40, grid=None, initial=None,
                     tol=1e-9, max_fixed_point=500, linear_tol=1e-13):
    """Projection-method trajectory; returns ``steps + 1`` snapshots including the initial one.

    Each step iterates on the pressure: a Helmholtz solve for the
    intermediate velocity with the current pressure gradient, a Poisson
    solve for the correction potential, the projection, and the pressure
    update, until successive velocity iterates agree to ``tol``.
    """
    if lam2 <= 0:
        raise ValueError("lam2 must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    grid = grid or build_periodic_grid(32, 2 * np.pi)
    h = grid.spacing[0]
    shape = grid.shape
    snap = initial or ns_initial_field(grid, lam1, lam2)
    u, v, p = snap.u.copy(), snap.v.copy(), snap.p.copy()
    project = _projector(_null_modes(shape))

    def helmholtz(f):
        f = f.reshape(shape)
        return (f - h_t * lam2 * laplacian5(f, h)).ravel()

    def neg_wide_laplacian(f):
        f = f.reshape(shape)
        return -(dx(dx(f, h), h) + dy(dy(f, h), h)).ravel()

    out = [FlowSnapshot(u.copy(), v.copy(), p.copy(), 0, lam1, lam2)]
    for step in range(steps):
        conv_u = u * dx(u, h) + v * dy(u, h)
        conv_v = u * dx(v, h) + v * dy(v, h)
        base_u = u - h_t * lam1 * conv_u
        base_v = v - h_t * lam1 * conv_v
        cur_u, cur_v = u, v
        for it in range(max_fixed_point):
            rhs_u = base_u - h_t * dx(p, h)
            rhs_v = base_v - h_t * dy(p, h)
            tu = conjugate_gradient(helmholtz, rhs_u.ravel(), x0=cur_u.ravel(), tol=linear_tol, atol=1e-15)[0]
            tv = conjugate_gradient(helmholtz, rhs_v.ravel(), x0=cur_v.ravel(), tol=linear_tol, atol=1e-15)[0]
            tu, tv = tu.reshape(shape), tv.reshape(shape)
            rhs = -divergence(tu, tv, h) / h_t
            phi = conjugate_gradient(neg_wide_laplacian, rhs.ravel(), tol=linear_tol, atol=1e-15,
                                     project=project)[0].reshape(shape)
            new_u = tu - h_t * dx(phi, h)
            new_v = tv - h_t * dy(phi, h)
            p = p + phi
            change = max(np.max(np.abs(new_u - cur_u)), np.max(np.abs(new_v - cur_v)))
            cur_u, cur_v = new_u, new_v
            if not np.isfinite(change):
                raise FixedPointDiverged(step, "non-finite iterate")
            if change <= tol and it > 0:
                break
        else:
            raise FixedPointDiverged(step, f"no fixed point after {max_fixed_point} iterations")
        u, v = cur_u, cur_v
        out.append(FlowSnapshot(u.copy(), v.copy(), p.copy(), step + 1, lam1, lam2))
    return out


def stack_trajectory(snapshots):
    return (np.stack([s.u for s in snapshots]), np.stack([s.v for s in snapshots]),
            np.stack([s.p for s in snapshots]))


def inject_noise(u_obs, v_obs, fraction, seed=0):
    """Add N(0, (fraction * std)^2) noise to each component from independent streams."""
    if fraction < 0:
        raise ValueError("fraction must be nonnegative")
    if fraction == 0:
        return u_obs.copy(), v_obs.copy()
    ru, rv = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    return (u_obs + ru.normal(0.0, fraction * np.std(u_obs), u_obs.shape),
            v_obs + rv.normal(0.0, fraction * np.std(v_obs), v_obs.shape))


# ---------------------------------------------------------------------------
# FD-PINN residuals (non-wrapping stencils, trimmed interiors)
# ---------------------------------------------------------------------------

def velocity_from_stream(psi, h):
    """u = D_y ψ, v = -D_x ψ on the one-cell interior; inputs (nt, n, n)."""
    u = (psi[:, 1:-1, 2:] - psi[:, 1:-1, :-2]) * (1.0 / (2 * h))
    v = (psi[:, :-2, 1:-1] - psi[:, 2:, 1:-1]) * (1.0 / (2 * h))
    return u, v


def _inner_derivatives(f, h):
    """Central first derivatives and 5-point Laplacian of a one-cell-interior field, on its own interior."""
    fx = (f[:, 2:, 1:-1] - f[:, :-2, 1:-1]) * (1.0 / (2 * h))
    fy = (f[:, 1:-1, 2:] - f[:, 1:-1, :-2]) * (1.0 / (2 * h))
    lap = (f[:, 2:, 1:-1] + f[:, :-2, 1:-1] + f[:, 1:-1, 2:] + f[:, 1:-1, :-2]
           - 4.0 * f[:, 1:-1, 1:-1]) * (1.0 / (h * h))
    return fx, fy, lap


def ns_residuals_fd(psi, p, lam1, lam2, h, h_t):
    """Momentum residuals (f, g) on the two-cell core for all forward-difference times.

    ``psi``, ``p``: arrays or tensors of shape (nt, n, n); ``lam1``, ``lam2``
    scalars or scalar tensors.  Returns arrays of shape (nt - 1, n - 4, n - 4).
    """
    u, v = velocity_from_stream(psi, h)
    ux, uy, lap_u = _inner_derivatives(u, h)
    vx, vy, lap_v = _inner_derivatives(v, h)
    uc, vc = u[:, 1:-1, 1:-1], v[:, 1:-1, 1:-1]
    px = (p[:, 3:-1, 2:-2] - p[:, 1:-3, 2:-2]) * (1.0 / (2 * h))
    py = (p[:, 2:-2, 3:-1] - p[:, 2:-2, 1:-3]) * (1.0 / (2 * h))
    ut = (uc[1:] - uc[:-1]) * (1.0 / h_t)
    vt = (vc[1:] - vc[:-1]) * (1.0 / h_t)
    k = slice(0, -1)
    f = ut + lam1 * (uc[k] * ux[k] + vc[k] * uy[k]) + px[k] - lam2 * lap_u[k]
    g = vt + lam1 * (uc[k] * vx[k] + vc[k] * vy[k]) + py[k] - lam2 * lap_v[k]
    return f, g


def ns_inverse_objective(psi, p, u_obs, v_obs, lam1, lam2, h, h_t, w_div=1e-3):
    """Tensor loss: data misfit on the one-cell interior, momentum residuals and divergence on the two-cell core."""
    u, v = velocity_from_stream(psi, h)
    du = u - u_obs[:, 1:-1, 1:-1]
    dv = v - v_obs[:, 1:-1, 1:-1]
    data = (du * du + dv * dv).mean()
    f, g = ns_residuals_fd(psi, p, lam1, lam2, h, h_t)
    pde = (f * f + g * g).mean()
    ux = (u[:, 2:, 1:-1] - u[:, :-2, 1:-1]) * (1.0 / (2 * h))
    vy = (v[:, 1:-1, 2:] - v[:, 1:-1, :-2]) * (1.0 / (2 * h))
    div = ux + vy
    div_term = w_div * (div * div).mean()
    total = data + pde + div_term
    return total, {"total": total, "data": data, "pde": pde, "boundary": div_term}


def ns_inverse_loss(psi, p, u_obs, v_obs, lam1, lam2, h, h_t, w_div=1e-3):
    """Float breakdown; the divergence term is reported in the ``boundary`` slot."""
    from ..losses import LossBreakdown

    _, terms = ns_inverse_objective(tape.as_tensor(psi), tape.as_tensor(p), u_obs, v_obs,
                                    lam1, lam2, h, h_t, w_div)
    return LossBreakdown(total=float(terms["total"].data), pde=float(terms["pde"].data),
                         boundary=float(terms["boundary"].data), data=float(terms["data"].data))


def core_sizes(n, n_times):
    grid = build_periodic_grid(n, 2 * np.pi)
    o1, o2, tc = core_subgrids(grid, n_times)
    return len(o1[0]) * len(o1[1]), len(o2[0]) * len(o2[1]), len(tc)
