import numpy as np
import pytest

from pinnlab import tape
from pinnlab.collocation import build_periodic_grid, build_slit_domain
from pinnlab.errors import FixedPointDiverged
from pinnlab.linalg import conjugate_gradient
from pinnlab.losses import fd_loss
from pinnlab.models.navier_stokes import (divergence, dx, dy, inject_noise, kinetic_energy, ns_generate_data,
                                          ns_initial_field, ns_inverse_loss, ns_residuals_fd, stack_trajectory,
                                          velocity_from_stream)
from pinnlab.models.poisson import (assemble_poisson_slit, poisson_fd_residual, slit_mask_jet,
                                    solve_poisson_fdm)
from pinnlab.models.schrodinger import (initial_profile, schrodinger_fd_residual, schrodinger_residual_complex,
                                        schrodinger_residual_fd, solve_schrodinger_fdm, trajectory_to_nodes)


# ---------------------------------------------------------------- Poisson

def _dense_slit_solution(h):
    """Independent dense assembly by coordinates, solved with LAPACK."""
    n = int(round(2 / h)) + 1
    xs = np.linspace(-1, 1, n)
    on_slit = lambda i, j: xs[i] >= -1e-12 and abs(xs[j]) < 1e-12
    unknown = [(i, j) for i in range(1, n - 1) for j in range(1, n - 1) if not on_slit(i, j)]
    pos = {ij: k for k, ij in enumerate(unknown)}
    A = np.zeros((len(unknown), len(unknown)))
    for k, (i, j) in enumerate(unknown):
        A[k, k] = 4 / h ** 2
        for nb in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if nb in pos:
                A[k, pos[nb]] = -1 / h ** 2
    u = np.zeros((n, n))
    sol = np.linalg.solve(A, np.ones(len(unknown)))
    for k, (i, j) in enumerate(unknown):
        u[i, j] = sol[k]
    return u.ravel()


@pytest.mark.parametrize("h", [0.5, 0.25, 0.1])
def test_poisson_fdm_matches_dense_oracle(h):
    grid, colloc = build_slit_domain(h)
    u = solve_poisson_fdm(assemble_poisson_slit(grid, colloc), tol=1e-14)
    assert np.max(np.abs(u - _dense_slit_solution(h))) <= 1e-12


def test_one_dimensional_analogue_is_exact_for_quadratic():
    n = 20
    h = 1.0 / n
    x = np.linspace(0, 1, n + 1)[1:-1]
    A = (np.diag(2 * np.ones(n - 1)) - np.diag(np.ones(n - 2), 1) - np.diag(np.ones(n - 2), -1)) / h ** 2
    u, _, _ = conjugate_gradient(lambda v: A @ v, np.ones(n - 1), tol=1e-14)
    assert np.max(np.abs(u - x * (1 - x) / 2)) <= 1e-12


def test_poisson_solution_symmetric_in_y():
    grid, colloc = build_slit_domain(0.1)
    U = solve_poisson_fdm(assemble_poisson_slit(grid, colloc), tol=1e-13).reshape(grid.shape)
    assert np.max(np.abs(U - U[:, ::-1])) <= 1e-10
    assert np.all(U >= 0)


def test_stencil_coefficients_and_boundary_rows():
    grid, colloc = build_slit_domain(0.5)
    system = assemble_poisson_slit(grid, colloc)
    rows = dict((k, (entries, rhs)) for k, entries, rhs in system.rows())
    k = int(colloc.interior_index[0])
    entries, rhs = rows[k]
    coeffs = sorted(c for _, c in entries)
    assert coeffs == [-4.0] * 4 + [16.0]
    assert rhs == 1.0
    b = int(colloc.boundary_index[0])
    assert rows[b] == ([(b, 1.0)], 0.0)


def test_fdm_solution_has_small_discrete_residual():
    grid, colloc = build_slit_domain(0.1)
    system = assemble_poisson_slit(grid, colloc)
    u = solve_poisson_fdm(system)
    loss = fd_loss(u, poisson_fd_residual(system))
    assert loss.total <= 1e-16
    assert np.max(np.abs(system.residual(u))) <= 1e-8


def test_slit_mask_vanishes_on_boundary_and_slit():
    grid, colloc = build_slit_domain(0.1)
    val = slit_mask_jet(colloc.boundary)[0]
    assert np.max(np.abs(val)) <= 1e-15
    assert np.all(slit_mask_jet(colloc.interior)[0] > 0)


# ---------------------------------------------------------------- Schrödinger

def test_initial_profile_peak():
    assert initial_profile(0.0) == 2.0


def test_constant_field_residual():
    N = 8
    a = 2.0 * np.ones(N + 1)
    b = np.zeros(N + 1)
    re, im = schrodinger_residual_fd(a, b, a, b, 0.1, 0.3)
    assert np.allclose(re, 8.0, rtol=0, atol=1e-12)
    assert np.all(im == 0.0)


def test_residual_matches_complex_oracle():
    rng = np.random.default_rng(0)
    N = 12
    psi0 = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    psi1 = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    re, im = schrodinger_residual_fd(psi0.real, psi0.imag, psi1.real, psi1.imag, 0.05, 0.2)
    ref = schrodinger_residual_complex(psi0, psi1, 0.05, 0.2)
    assert np.max(np.abs(re + 1j * im - ref)) <= 1e-13 * max(1.0, np.max(np.abs(ref)))


def test_residual_uses_periodic_ghost():
    N = 6
    a1 = np.zeros(N + 1)
    a1[N - 1] = 1.0  # only the ghost neighbour of j = 0 is nonzero
    z = np.zeros(N + 1)
    re, _ = schrodinger_residual_fd(z, z, a1, z, 1.0, 1.0)
    assert re[0] == 0.5
    assert re[1] == 0.0


def test_reference_steps_converge():
    field, residuals = solve_schrodinger_fdm(32, 40)
    assert field.real.shape == (41, 33)
    assert np.max(residuals) <= 1e-10
    assert np.array_equal(field.real[:, -1], field.real[:, 0])
    loss = fd_loss(trajectory_to_nodes(field), schrodinger_fd_residual(32, 40))
    assert loss.total <= 1e-8


def test_newton_and_picard_agree():
    a, _ = solve_schrodinger_fdm(32, 80, method="picard")
    b, _ = solve_schrodinger_fdm(32, 80, method="newton")
    assert np.max(np.abs(a.psi - b.psi)) <= 1e-9


def test_reference_rejects_tiny_grid():
    with pytest.raises(ValueError):
        solve_schrodinger_fdm(1, 10)


# ---------------------------------------------------------------- Navier-Stokes

def test_initial_field_is_divergence_free_and_mean_zero():
    snap = ns_initial_field()
    h = 2 * np.pi / 32
    assert np.max(np.abs(divergence(snap.u, snap.v, h))) <= 1e-12
    assert abs(snap.u.mean()) <= 1e-14
    assert abs(snap.v.mean()) <= 1e-14


def test_central_difference_second_order():
    errs = []
    for n in (16, 32):
        grid = build_periodic_grid(n, 2 * np.pi)
        X, Y = grid.mesh()
        h = grid.spacing[0]
        errs.append(np.max(np.abs(dx(np.sin(X) * np.cos(Y), h) - np.cos(X) * np.cos(Y))))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_zero_field_stays_zero():
    grid = build_periodic_grid(16, 2 * np.pi)
    snap = ns_initial_field(grid)
    zero = type(snap)(np.zeros(grid.shape), np.zeros(grid.shape), np.zeros(grid.shape), 0, 1.0, 0.1)
    traj = ns_generate_data(steps=3, grid=grid, initial=zero)
    u, v, p = stack_trajectory(traj)
    assert np.all(u == 0) and np.all(v == 0)


def test_generator_small_run_divergence_and_energy():
    grid = build_periodic_grid(16, 2 * np.pi)
    h = grid.spacing[0]
    traj = ns_generate_data(steps=5, grid=grid)
    energies = [kinetic_energy(s.u, s.v, h) for s in traj]
    assert all(np.max(np.abs(divergence(s.u, s.v, h))) <= 1e-8 for s in traj)
    assert all(b <= a for a, b in zip(energies, energies[1:]))


def test_generator_rejects_bad_viscosity():
    with pytest.raises(ValueError):
        ns_generate_data(lam2=0.0, steps=1)


def test_noise_statistics():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(10, 32, 32))
    v = 3 * rng.normal(size=(10, 32, 32))
    nu, nv = inject_noise(u, v, 0.01, seed=5)
    eu, ev = nu - u, nv - v
    assert abs(eu.std() / (0.01 * u.std()) - 1) <= 0.1
    assert abs(ev.std() / (0.01 * v.std()) - 1) <= 0.1
    assert abs(np.corrcoef(eu.ravel(), ev.ravel())[0, 1]) <= 0.05
    assert np.array_equal(inject_noise(u, v, 0.0)[0], u)


def _residual_loop(psi, p, lam1, lam2, h, h_t):
    """Pointwise evaluation of the momentum residual f on the two-cell core."""
    nt, n, _ = psi.shape
    u = lambda k, i, j: (psi[k, i, j + 1] - psi[k, i, j - 1]) / (2 * h)
    v = lambda k, i, j: (psi[k, i - 1, j] - psi[k, i + 1, j]) / (2 * h)
    out = np.empty((nt - 1, n - 4, n - 4))
    for k in range(nt - 1):
        for i in range(2, n - 2):
            for j in range(2, n - 2):
                ux = (u(k, i + 1, j) - u(k, i - 1, j)) / (2 * h)
                uy = (u(k, i, j + 1) - u(k, i, j - 1)) / (2 * h)
                lap = (u(k, i + 1, j) + u(k, i - 1, j) + u(k, i, j + 1) + u(k, i, j - 1) - 4 * u(k, i, j)) / h ** 2
                px = (p[k, i + 1, j] - p[k, i - 1, j]) / (2 * h)
                ut = (u(k + 1, i, j) - u(k, i, j)) / h_t
                out[k, i - 2, j - 2] = ut + lam1 * (u(k, i, j) * ux + v(k, i, j) * uy) + px - lam2 * lap
    return out


def test_ns_residual_matches_pointwise_oracle():
    rng = np.random.default_rng(1)
    psi = rng.normal(size=(3, 9, 9))
    p = rng.normal(size=(3, 9, 9))
    f, _ = ns_residuals_fd(psi, p, 0.8, 0.05, 0.3, 0.1)
    ref = _residual_loop(psi, p, 0.8, 0.05, 0.3, 0.1)
    assert np.max(np.abs(f - ref)) <= 1e-13 * max(1.0, np.max(np.abs(ref)))


def test_steady_linear_field_residual_is_pressure_gradient():
    n, h = 10, 0.2
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    psi = np.stack([np.sin(0.3 * I * h) * np.cos(0.7 * J * h)] * 2)
    p = np.stack([(I * h) ** 2] * 2)
    f, _ = ns_residuals_fd(psi, p, 0.0, 0.0, h, 0.1)
    assert np.allclose(f[0], 2 * I[2:-2, 2:-2] * h, atol=1e-12)


def test_inverse_loss_zero_data_term_on_own_velocities():
    rng = np.random.default_rng(2)
    psi = rng.normal(size=(2, 8, 8))
    p = np.zeros((2, 8, 8))
    u, v = velocity_from_stream(psi, 0.5)
    u_obs = np.zeros((2, 8, 8))
    v_obs = np.zeros((2, 8, 8))
    u_obs[:, 1:-1, 1:-1], v_obs[:, 1:-1, 1:-1] = u, v
    loss = ns_inverse_loss(psi, p, u_obs, v_obs, 1.0, 0.1, 0.5, 0.1)
    assert loss.data == 0.0
    assert loss.boundary <= 1e-28  # discrete divergence of a stream-function field
