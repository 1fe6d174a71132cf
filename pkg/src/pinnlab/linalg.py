"""Conjugate gradients with optional projection onto a null-space complement."""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence


def conjugate_gradient(apply, b, x0=None, tol=1e-10, maxiter=None, project=None, atol=0.0):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A`` given as a callable.

    Stops when ``|b - A x| <= max(tol * |b|, atol)``.  When ``project`` is
    given it is applied to ``b``, to the iterate and to every search
    direction, which restricts the solve to the range of a singular ``A``
    (e.g. removing the mean for a periodic Laplacian).
    Returns ``(x, iterations, residual_norm)``.
    """
    b = np.asarray(b, dtype=float)
    proj = project if project is not None else (lambda v: v)
    b = proj(b)
    x = np.zeros_like(b) if x0 is None else proj(np.array(x0, dtype=float))
    maxiter = maxiter if maxiter is not None else 10 * b.size
    r = b - apply(x)
    r = proj(r)
    bnorm = np.linalg.norm(b)
    target = max(tol * bnorm, atol)
    rr = r @ r if r.ndim == 1 else np.vdot(r, r).real
    if np.sqrt(rr) <= target or bnorm == 0.0:
        return x, 0, float(np.sqrt(rr))
    p = r.copy()
    for it in range(1, maxiter + 1):
        Ap = proj(apply(p))
        pAp = np.vdot(p, Ap).real
        if pAp <= 0:
            raise NoConvergence(it, float(np.sqrt(rr)))
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = np.vdot(r, r).real
        if np.sqrt(rr_new) <= target:
            # confirm with the true residual to guard against drift
            true_r = proj(b - apply(x))
            tn = np.linalg.norm(true_r)
            if tn <= target:
                return x, it, float(tn)
            r = true_r
            rr_new = tn * tn
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NoConvergence(maxiter, float(np.sqrt(rr)))
