"""Command-line experiment drivers.

Usage::

    pinnlab <experiment> [--config FILE] [--set key=value ...] --out DIR

Config files are flat ``key = value`` lines; ``#`` starts a comment.
Values are parsed as int, float, bool (true/false) or comma-separated
lists of those, falling back to strings.  ``--set`` overrides file values.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .errors import CertificationError, ConfigError, NumericalError, PinnlabError, ZeroReference

EXPERIMENTS = ("poisson-fdm", "poisson-fdpinn", "poisson-adpinn", "schrodinger-ref", "schrodinger-fdpinn",
               "ns-datagen", "ns-inverse", "certify", "gradcheck", "example32")

_TRAIN = {"iterations": 200000, "learning_rate": 1e-3, "log_every": 1000, "checkpoint_every": 0, "seed": 0}

DEFAULTS = {
    "poisson-fdm": {"h": 0.05, "resolution": 101},
    "poisson-fdpinn": {**_TRAIN, "h": 0.05, "hidden": 32, "depth": 7, "activation": "relu", "hard_bc": True,
                       "resolution": 101},
    "poisson-adpinn": {**_TRAIN, "h": 0.05, "hidden": 32, "depth": 7, "activation": "tanh",
                       "alpha_B": [1.0, 100.0, 10000.0], "hard_bc": False, "resolution": 101},
    "schrodinger-ref": {"N": 100, "T": 500, "tol": 1e-10, "method": "auto"},
    "schrodinger-fdpinn": {**_TRAIN, "iterations": 350000, "N": 100, "T": 500, "hidden": 100, "depth": 20,
                           "activation": "relu"},
    "ns-datagen": {"n": 32, "steps": 40, "h_t": 0.1, "lam1": 1.0, "lam2": 0.1, "tol": 1e-9},
    "ns-inverse": {**_TRAIN, "iterations": 500000, "n": 32, "snapshots": 41, "h_t": 0.1, "lam1": 1.0,
                   "lam2": 0.1, "hidden": 100, "depth": 9, "activation": "relu", "noise": 0.0, "noise_seed": 0,
                   "w_div": 1e-3, "lam_init": 0.5},
    "certify": {"h": 0.05, "hidden": 32, "depth": 7, "seed": 0, "perturbation": 0.1, "samples": 200,
                "lambdas": [-10.0, -1.0, -0.1, 0.1, 1.0, 10.0], "smooth_rel_tol": 1e-5, "ratio_tol": 1e-9,
                "relu_checkpoint": "", "tanh_checkpoint": ""},
    "gradcheck": {"n_configs": 100, "seed": 0, "step": 1e-5, "tol": 1e-5},
    "example32": {"a": 1.0, "u0": 0.0, "z": [0.25, 0.5, 0.75], "nu": 2},
}

# full-scale figures for the inverse Navier-Stokes problem (500 000 iterations, 32 x 32, 41 snapshots)
NS_FULL_SCALE_REFERENCE = {"clean": {"lam1": 0.9546, "lam2": 0.0959}, "noise_0.01": {"lam1": 0.9522, "lam2": 0.0960}}


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def _scalar(text):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def parse_value(text):
    if "," in text:
        return [_scalar(p) for p in text.split(",") if p.strip()]
    return _scalar(text)


def parse_config_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = parse_value(value)
    return out


def resolve_config(experiment, file_values=None, overrides=None):
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cfg = dict(DEFAULTS[experiment])
    for source in (file_values or {}, overrides or {}):
        for k, v in source.items():
            if k not in cfg:
                raise ConfigError(f"unknown key {k!r} for {experiment}")
            default = DEFAULTS[experiment][k]
            if isinstance(default, list) and not isinstance(v, list):
                v = [v]
            elif isinstance(default, float) and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            elif isinstance(default, bool) and not isinstance(v, bool):
                raise ConfigError(f"{k} must be true or false")
            elif isinstance(default, str) and not isinstance(v, str):
                v = str(v)
            cfg[k] = v
    return cfg


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def relative_l2(field_a, field_b, mask=None):
    """``|a - b|_2 / |b|_2`` over the masked entries."""
    a = np.asarray(field_a, dtype=float)
    b = np.asarray(field_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        a, b = a[mask], b[mask]
    denom = np.sqrt(np.sum(b * b))
    if denom == 0:
        raise ZeroReference("reference field has zero norm")
    return float(np.sqrt(np.sum((a - b) ** 2)) / denom)


def _colormap(t):
    """Blue-white-red ramp for t in [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    r = np.where(t < 0.5, 2 * t, 1.0)
    g = np.where(t < 0.5, 2 * t, 2 * (1 - t))
    b = np.where(t < 0.5, 1.0, 2 * (1 - t))
    return np.stack([r, g, b], axis=-1)


def write_ppm(path, field):
    """Binary P6 image; row 0 of the image is the last column of ``field`` (y up)."""
    f = np.asarray(field, dtype=float)
    img = f.T[::-1]
    finite = np.isfinite(img)
    lo = float(np.min(img[finite])) if finite.any() else 0.0
    hi = float(np.max(img[finite])) if finite.any() else 1.0
    t = (img - lo) / (hi - lo) if hi > lo else np.full(img.shape, 0.5)
    rgb = np.round(255 * _colormap(np.where(finite, t, 0.5))).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(rgb.tobytes())


def read_ppm_size(path):
    with open(path, "rb") as fh:
        header = fh.read(64).split()
    return int(header[1]), int(header[2])


def write_csv(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_metrics(out, metrics):
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(_jsonable(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _train_config(cfg):
    from .optimize import TrainConfig

    return TrainConfig(iterations=int(cfg["iterations"]), learning_rate=float(cfg["learning_rate"]),
                       seed=int(cfg["seed"]), log_every=int(cfg["log_every"]),
                       checkpoint_every=int(cfg["checkpoint_every"]))


def _train(model, objective, cfg, out):
    from dataclasses import replace

    from .optimize import train

    tc = _train_config(cfg)
    if tc.checkpoint_every:
        tc = replace(tc, checkpoint_path=os.path.join(out, "checkpoint.json"))
    return train(model, objective, tc, log_path=os.path.join(out, "loss.csv"))


def _widths(cfg, d_in, d_out):
    return [d_in] + [int(cfg["hidden"])] * int(cfg["depth"]) + [d_out]


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------

def _poisson_setup(h):
    from .collocation import build_slit_domain
    from .models.poisson import assemble_poisson_slit, solve_poisson_fdm

    grid, colloc = build_slit_domain(h)
    system = assemble_poisson_slit(grid, colloc)
    return grid, colloc, system, solve_poisson_fdm(system)


def _render_grid(resolution):
    s = np.linspace(-1.0, 1.0, int(resolution))
    X, Y = np.meshgrid(s, s, indexing="ij")
    return s, np.stack([X.ravel(), Y.ravel()], axis=1)


def _write_poisson_fields(out, grid, system, u_fdm, u_model=None, model=None, resolution=101, name="solution"):
    nodes = system.nodes
    cols = [nodes[:, 0], nodes[:, 1], u_fdm]
    header = ["x", "y", "u_fdm"]
    if u_model is not None:
        cols.append(u_model)
        header.append("u_model")
    write_csv(os.path.join(out, f"{name}_nodes.csv"), header, cols)
    s, pts = _render_grid(resolution)
    if model is None:
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator((grid.axis(0), grid.axis(1)), u_fdm.reshape(grid.shape))
        vals = interp(pts)
    else:
        vals = model(pts)[:, 0]
    field = vals.reshape(len(s), len(s))
    write_csv(os.path.join(out, f"{name}_{len(s)}x{len(s)}.csv"), ["x", "y", "u"], [pts[:, 0], pts[:, 1], vals])
    write_ppm(os.path.join(out, f"{name}.ppm"), field)


def run_poisson_fdm(cfg, out):
    from .collocation import slit_node_counts

    grid, colloc, system, u = _poisson_setup(float(cfg["h"]))
    res = system.residual(u)
    rel = float(np.linalg.norm(res[system.interior_index]) / np.linalg.norm(system.rhs[system.interior_index]))
    _write_poisson_fields(out, grid, system, u, resolution=cfg["resolution"])
    slit, ring = slit_node_counts(grid)
    return {"n_nodes": int(grid.size), "n_interior": colloc.n_interior, "n_boundary": colloc.n_boundary,
            "n_slit": slit, "n_outer": ring, "relative_residual": rel, "u_max": float(u.max())}


def run_poisson_fdpinn(cfg, out):
    from .losses import LossWeights, fdpinn_loss, fdpinn_objective
    from .models.poisson import SLIT_MASK, poisson_fd_residual
    from .network import init_network, wrap_hard_constraint

    grid, colloc, system, u_fdm = _poisson_setup(float(cfg["h"]))
    D = poisson_fd_residual(system)
    w = LossWeights()
    net = init_network(_widths(cfg, 2, 1), cfg["activation"], seed=int(cfg["seed"]))
    model = wrap_hard_constraint(net, SLIT_MASK) if cfg["hard_bc"] else net
    result = _train(model, lambda m: fdpinn_objective(m, D, w), cfg, out)
    best = result.best_network
    getattr(best, "base", best).save(os.path.join(out, "network.json"))
    u_model = best(system.nodes)[:, 0]
    _write_poisson_fields(out, grid, system, u_fdm, u_model, best, cfg["resolution"])
    final = fdpinn_loss(best, colloc, D, w)
    return {"best_loss": result.best_loss, "best_iteration": result.best_iteration,
            "loss_terms": final.__dict__, "rel_l2_vs_fdm": relative_l2(u_model, u_fdm),
            "n_params": int(best.n_params), "iterations": int(cfg["iterations"])}


def run_poisson_adpinn(cfg, out):
    from .losses import LossWeights, adpinn_loss, adpinn_objective
    from .models.poisson import SLIT_MASK, poisson_boundary_ad, poisson_residual_ad
    from .network import init_network, wrap_hard_constraint

    grid, colloc, system, u_fdm = _poisson_setup(float(cfg["h"]))
    runs = [("alpha_B_%g" % a, float(a), False) for a in cfg["alpha_B"]]
    if cfg["hard_bc"]:
        runs.append(("hard_bc", 1.0, True))
    metrics = {"runs": {}}
    for name, alpha, hard in runs:
        sub = os.path.join(out, name)
        os.makedirs(sub, exist_ok=True)
        w = LossWeights(alpha_B=alpha)
        net = init_network(_widths(cfg, 2, 1), cfg["activation"], seed=int(cfg["seed"]))
        model = wrap_hard_constraint(net, SLIT_MASK) if hard else net

        def objective(m, w=w):
            return adpinn_objective(m, colloc, poisson_residual_ad, poisson_boundary_ad, w)

        result = _train(model, objective, cfg, sub)
        best = result.best_network
        getattr(best, "base", best).save(os.path.join(sub, "network.json"))
        u_model = best(system.nodes)[:, 0]
        _write_poisson_fields(sub, grid, system, u_fdm, u_model, best, cfg["resolution"])
        terms = adpinn_loss(best, colloc, poisson_residual_ad, poisson_boundary_ad, w)
        metrics["runs"][name] = {"alpha_B": alpha, "hard_bc": hard, "best_loss": result.best_loss,
                                 "best_iteration": result.best_iteration, "loss_terms": terms.__dict__,
                                 "rel_l2_vs_fdm": relative_l2(u_model, u_fdm)}
    return metrics


# ---------------------------------------------------------------------------
# Schrödinger
# ---------------------------------------------------------------------------

def _write_schrodinger_fields(out, N, T, real, imag, name):
    from .collocation import build_interval_grid

    nodes = build_interval_grid(N, T).points()
    real, imag = np.asarray(real).ravel(), np.asarray(imag).ravel()
    write_csv(os.path.join(out, f"{name}.csv"), ["t", "x", "re", "im", "abs"],
              [nodes[:, 0], nodes[:, 1], real, imag, np.hypot(real, imag)])
    write_ppm(os.path.join(out, f"{name}_abs.ppm"), np.hypot(real, imag).reshape(T + 1, N + 1))


def run_schrodinger_ref(cfg, out):
    from .losses import fd_loss
    from .models.schrodinger import schrodinger_fd_residual, solve_schrodinger_fdm, trajectory_to_nodes

    N, T = int(cfg["N"]), int(cfg["T"])
    field, residuals = solve_schrodinger_fdm(N, T, tol=float(cfg["tol"]), method=cfg["method"])
    _write_schrodinger_fields(out, N, T, field.real, field.imag, "reference")
    loss = fd_loss(trajectory_to_nodes(field), schrodinger_fd_residual(N, T))
    return {"N": N, "T": T, "max_step_residual": float(residuals.max()), "fd_loss": loss.total,
            "psi_abs_max": float(np.max(np.abs(field.psi)))}


def run_schrodinger_fdpinn(cfg, out):
    from .errors import FixedPointDiverged
    from .losses import LossWeights, fdpinn_objective
    from .models.schrodinger import INITIAL_ANCHOR, schrodinger_fd_residual, solve_schrodinger_fdm
    from .network import init_network, wrap_hard_constraint

    N, T = int(cfg["N"]), int(cfg["T"])
    D = schrodinger_fd_residual(N, T)
    net = init_network(_widths(cfg, 2, 2), cfg["activation"], seed=int(cfg["seed"]))
    model = wrap_hard_constraint(net, INITIAL_ANCHOR)
    w = LossWeights()
    result = _train(model, lambda m: fdpinn_objective(m, D, w), cfg, out)
    best = result.best_network
    best.base.save(os.path.join(out, "network.json"))
    vals = best(D.nodes)
    _write_schrodinger_fields(out, N, T, vals[:, 0], vals[:, 1], "prediction")
    metrics = {"best_loss": result.best_loss, "best_iteration": result.best_iteration,
               "initial_loss": float(result.raw_loss_history[0]),
               "rel_l2_abs_vs_reference": None, "rel_l2_complex_vs_reference": None}
    try:
        ref, _ = solve_schrodinger_fdm(N, T)
    except FixedPointDiverged as exc:
        # the discrete reference is only a comparison; training does not depend on it
        metrics["reference_error"] = str(exc)
        return metrics
    metrics["rel_l2_abs_vs_reference"] = relative_l2(np.hypot(vals[:, 0], vals[:, 1]), np.abs(ref.psi).ravel())
    metrics["rel_l2_complex_vs_reference"] = relative_l2(vals, np.stack([ref.real.ravel(), ref.imag.ravel()], 1))
    return metrics


# ---------------------------------------------------------------------------
# Navier-Stokes
# ---------------------------------------------------------------------------

def _ns_trajectory(n, steps, h_t, lam1, lam2, tol=1e-9):
    from .collocation import build_periodic_grid
    from .models.navier_stokes import ns_generate_data

    grid = build_periodic_grid(int(n), 2 * np.pi)
    return grid, ns_generate_data(lam1, lam2, h_t, int(steps), grid, tol=tol)


def run_ns_datagen(cfg, out):
    from .models.navier_stokes import divergence, kinetic_energy

    grid, snaps = _ns_trajectory(cfg["n"], cfg["steps"], float(cfg["h_t"]), float(cfg["lam1"]),
                                 float(cfg["lam2"]), float(cfg["tol"]))
    h = grid.spacing[0]
    div = [float(np.max(np.abs(divergence(s.u, s.v, h)))) for s in snaps]
    energy = [kinetic_energy(s.u, s.v, h) for s in snaps]
    X, Y = grid.mesh()
    cols = [[], [], [], [], [], [], [], []]
    for s in snaps:
        for c, arr in zip(cols, (np.full(X.size, s.time_index), np.tile(np.arange(X.shape[0]).repeat(X.shape[1]), 1),
                                 np.tile(np.arange(X.shape[1]), X.shape[0]), X.ravel(), Y.ravel(),
                                 s.u.ravel(), s.v.ravel(), s.p.ravel())):
            c.extend(arr.tolist())
    write_csv(os.path.join(out, "trajectory.csv"), ["k", "i", "j", "x", "y", "u", "v", "p"], cols)
    write_ppm(os.path.join(out, "u_final.ppm"), snaps[-1].u)
    write_ppm(os.path.join(out, "p_final.ppm"), snaps[-1].p - snaps[-1].p.mean())
    return {"n": int(cfg["n"]), "steps": int(cfg["steps"]), "max_divergence": max(div),
            "kinetic_energy": energy, "energy_non_increasing": bool(np.all(np.diff(energy) <= 0))}


def ns_network_inputs(n, n_times, h_t):
    """Network inputs for every (time, x, y) node, scaled to [-1, 1] per axis."""
    t = np.arange(n_times) * h_t
    x = np.arange(n) * (2 * np.pi / n)
    T, X, Y = np.meshgrid(t, x, x, indexing="ij")
    t_span = max(t[-1], 1e-12)
    return np.stack([2 * T.ravel() / t_span - 1, X.ravel() / np.pi - 1, Y.ravel() / np.pi - 1], axis=1)


def ns_inverse_setup(n, snapshots, h_t, lam1, lam2, noise=0.0, noise_seed=0):
    from .models.navier_stokes import inject_noise, stack_trajectory

    grid, snaps = _ns_trajectory(n, snapshots - 1, h_t, lam1, lam2)
    u, v, p = stack_trajectory(snaps)
    u_obs, v_obs = inject_noise(u, v, noise, noise_seed)
    return grid, (u, v, p), (u_obs, v_obs)


def ns_inverse_objective_for(grid, u_obs, v_obs, h_t, w_div=1e-3):
    """Objective on a :class:`ParameterBundle` view ``(network, [lam1, lam2])``."""
    from .models.navier_stokes import ns_inverse_objective

    nt, n = u_obs.shape[0], grid.shape[0]
    h = grid.spacing[0]
    Z = ns_network_inputs(n, nt, h_t)

    def objective(view):
        net, lam = view
        out = net.value(Z).reshape(nt, n, n, 2)
        return ns_inverse_objective(out[..., 0], out[..., 1], u_obs, v_obs, lam[0], lam[1], h, h_t, w_div)

    return objective


def run_ns_inverse(cfg, out):
    from .network import init_network
    from .optimize import ParameterBundle

    grid, (u, v, p), (u_obs, v_obs) = ns_inverse_setup(cfg["n"], int(cfg["snapshots"]), float(cfg["h_t"]),
                                                      float(cfg["lam1"]), float(cfg["lam2"]),
                                                      float(cfg["noise"]), int(cfg["noise_seed"]))
    objective = ns_inverse_objective_for(grid, u_obs, v_obs, float(cfg["h_t"]), float(cfg["w_div"]))
    net = init_network(_widths(cfg, 3, 2), cfg["activation"], seed=int(cfg["seed"]))
    bundle = ParameterBundle(net, [cfg["lam_init"], cfg["lam_init"]])
    result = _train(bundle, objective, cfg, out)
    best = result.best_network
    best.net.save(os.path.join(out, "network.json"))
    lam1, lam2 = (float(x) for x in best.scalars)
    nt, n = u.shape[0], grid.shape[0]
    pred = best.net(ns_network_inputs(n, nt, float(cfg["h_t"]))).reshape(nt, n, n, 2)
    p_pred = pred[..., 1] - pred[..., 1].mean(axis=(1, 2), keepdims=True)
    p_true = p - p.mean(axis=(1, 2), keepdims=True)
    mid = nt // 2
    write_ppm(os.path.join(out, "pressure_true.ppm"), p_true[mid])
    write_ppm(os.path.join(out, "pressure_pred.ppm"), p_pred[mid])
    write_csv(os.path.join(out, "pressure_mid.csv"), ["i", "j", "p_true", "p_pred"],
              [np.arange(n).repeat(n), np.tile(np.arange(n), n), p_true[mid].ravel(), p_pred[mid].ravel()])
    return {"lam1": lam1, "lam2": lam2,
            "lam1_rel_err": abs(lam1 - cfg["lam1"]) / abs(cfg["lam1"]),
            "lam2_rel_err": abs(lam2 - cfg["lam2"]) / abs(cfg["lam2"]),
            "best_loss": result.best_loss, "best_iteration": result.best_iteration,
            "pressure_rel_l2_mean_removed": relative_l2(p_pred, p_true),
            "noise": float(cfg["noise"]), "reference_full_scale": NS_FULL_SCALE_REFERENCE}


# ---------------------------------------------------------------------------
# certification, gradient check, ODE example
# ---------------------------------------------------------------------------

def certification_suite(h=0.05, hidden=32, depth=7, seed=0, perturbation=0.1, samples=200,
                        lambdas=(-10.0, -1.0, -0.1, 0.1, 1.0, 10.0), relu_net=None, tanh_net=None):
    """Witness checks on the slit Poisson set for a ReLU and a tanh network ``u_hat``.

    Networks default to seeded random ones with perturbed (nonzero) biases.
    Returns a JSON-ready report; ``report["passed"]`` is computed by the caller.
    """
    from .collocation import build_slit_domain
    from .losses import LossWeights, adpinn_loss, fdpinn_loss
    from .models.poisson import assemble_poisson_slit, poisson_boundary_ad, poisson_fd_residual, poisson_residual_ad
    from .network import init_network
    from .witness import build_null_witness_relu, build_null_witness_smooth, certify_nonuniqueness

    grid, colloc = build_slit_domain(h)
    D = poisson_fd_residual(assemble_poisson_slit(grid, colloc))
    w = LossWeights()
    rng = np.random.default_rng(seed)

    def random_net(act):
        net = init_network([2] + [hidden] * depth + [1], act, seed=seed)
        return net.with_flat(net.to_flat() + perturbation * rng.standard_normal(net.n_params))

    relu_net = relu_net or random_net("relu")
    tanh_net = tanh_net or random_net("tanh")
    # a point strictly inside a grid cell, off the diagonals through nodes
    z0 = np.array([-0.5 + 0.47 * h, 0.5 + 0.58 * h])
    eps = 0.4 * h
    pts = z0[None, :] + 0.3 * h * rng.uniform(-1.0, 1.0, (int(samples), 2))
    evaluators = {
        "adpinn": lambda m: adpinn_loss(m, colloc, poisson_residual_ad, poisson_boundary_ad, w).total,
        "fdpinn": lambda m: fdpinn_loss(m, colloc, D, w).total,
    }
    report = {"h": h, "z0": z0, "n_interior": colloc.n_interior, "n_boundary": colloc.n_boundary}
    tent = build_null_witness_relu(colloc, z0, np.ones(1), eps, L_target=relu_net.depth)
    report["relu_witness"] = tent.report()
    smooth = build_null_witness_smooth(colloc, 2, 0, z0, np.ones(1), L=tanh_net.depth, seed=seed)
    report["smooth_witness"] = smooth.report()
    for label, u_hat, phi in (("relu", relu_net, tent), ("tanh", tanh_net, smooth)):
        for name, ev in evaluators.items():
            report[f"{label}_{name}"] = certify_nonuniqueness(u_hat, phi, ev, lambdas, samples=pts)
    return report


def _certify_verdict(report, smooth_rel_tol, ratio_tol):
    checks = {}
    for name in ("adpinn", "fdpinn"):
        checks[f"relu_{name}_exact"] = report[f"relu_{name}"]["max_abs_diff"] == 0.0
        checks[f"tanh_{name}_rel"] = report[f"tanh_{name}"]["max_rel_diff"] <= smooth_rel_tol
        for label in ("relu", "tanh"):
            ratio = report[f"{label}_{name}"].get("offgrid_ratio_10_over_1", np.nan)
            checks[f"{label}_{name}_ratio"] = bool(abs(ratio - 10.0) <= ratio_tol)
    return checks


def run_certify(cfg, out):
    from .network import Network

    relu_net = Network.load(cfg["relu_checkpoint"]) if cfg["relu_checkpoint"] else None
    tanh_net = Network.load(cfg["tanh_checkpoint"]) if cfg["tanh_checkpoint"] else None
    report = certification_suite(float(cfg["h"]), int(cfg["hidden"]), int(cfg["depth"]), int(cfg["seed"]),
                                 float(cfg["perturbation"]), int(cfg["samples"]), tuple(cfg["lambdas"]),
                                 relu_net, tanh_net)
    checks = _certify_verdict(report, float(cfg["smooth_rel_tol"]), float(cfg["ratio_tol"]))
    report["checks"] = checks
    report["passed"] = all(checks.values())
    with open(os.path.join(out, "witness_report.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not report["passed"]:
        failed = ", ".join(k for k, v in checks.items() if not v)
        return report, CertificationError(f"failed checks: {failed}")
    return report


def run_gradcheck(cfg, out):
    from .autodiff import random_gradcheck

    rows = random_gradcheck(int(cfg["n_configs"]), int(cfg["seed"]), float(cfg["step"]))
    keys = list(rows[0])
    write_csv(os.path.join(out, "gradcheck.csv"), keys, [[str(r[k]) if isinstance(r[k], list) else r[k]
                                                           for r in rows] for k in keys])
    metrics = {"n_configs": len(rows), "max_grad_rel_err": max(r["grad_rel_err"] for r in rows),
               "max_jet_err": max(r["jet_err"] for r in rows),
               "activations": sorted({r["activation"] for r in rows})}
    metrics["passed"] = metrics["max_grad_rel_err"] <= cfg["tol"] and metrics["max_jet_err"] <= cfg["tol"]
    if not metrics["passed"]:
        return metrics, CertificationError("finite-difference agreement above tolerance")
    return metrics


def run_example32(cfg, out):
    from .witness import example32_minimizers

    z = np.asarray(cfg["z"], dtype=float)
    net_a, net_b, loss_a, loss_b = example32_minimizers(float(cfg["a"]), float(cfg["u0"]), z, int(cfg["nu"]))
    s = np.linspace(0.0, 1.0, 101)[:, None]
    ua, ub = net_a(s)[:, 0], net_b(s)[:, 0]
    write_csv(os.path.join(out, "minimizers.csv"), ["z", "u_a", "u_b"], [s[:, 0], ua, ub])
    net_a.save(os.path.join(out, "network_a.json"))
    net_b.save(os.path.join(out, "network_b.json"))
    return {"loss_a": loss_a, "loss_b": loss_b, "values_a": net_a(z[:, None])[:, 0],
            "values_b": net_b(z[:, None])[:, 0], "max_gap_on_collocation": float(np.max(np.abs(
                net_a(z[:, None]) - net_b(z[:, None])))), "max_gap_on_unit_interval": float(np.max(np.abs(ua - ub)))}


RUNNERS = {
    "poisson-fdm": run_poisson_fdm,
    "poisson-fdpinn": run_poisson_fdpinn,
    "poisson-adpinn": run_poisson_adpinn,
    "schrodinger-ref": run_schrodinger_ref,
    "schrodinger-fdpinn": run_schrodinger_fdpinn,
    "ns-datagen": run_ns_datagen,
    "ns-inverse": run_ns_inverse,
    "certify": run_certify,
    "gradcheck": run_gradcheck,
    "example32": run_example32,
}


def run(experiment, cfg, out):
    """Run one experiment; returns ``(exit_code, metrics)``."""
    os.makedirs(out, exist_ok=True)
    result = RUNNERS[experiment](cfg, out)
    failure = None
    if isinstance(result, tuple):
        result, failure = result
    metrics = {"experiment": experiment, "config": cfg, "results": result}
    write_metrics(out, metrics)
    if failure is not None:
        raise failure
    return 0, metrics


def build_parser():
    p = argparse.ArgumentParser(prog="pinnlab", description=__doc__.split("\n\n")[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
    p.add_argument("--out", default="out", help="output directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        file_values = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    file_values = parse_config_text(fh.read())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = parse_value(v)
        cfg = resolve_config(args.experiment, file_values, overrides)
        code, _ = run(args.experiment, cfg, args.out)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, PinnlabError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{args.experiment}: wrote {args.out} in {time.perf_counter() - started:.1f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
