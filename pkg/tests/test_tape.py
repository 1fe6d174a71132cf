import numpy as np
import scipy.sparse as sp

from pinnlab import tape


def _numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _check(build, x, rtol=1e-6):
    t = tape.Tensor(x.copy(), requires_grad=True)
    out = build(t)
    out.backward()
    ref = _numeric_grad(lambda v: float(build(tape.Tensor(v)).data), x)
    assert np.allclose(t.grad, ref, rtol=rtol, atol=1e-8)


def test_elementwise_ops():
    x = np.random.default_rng(0).uniform(0.5, 1.5, (3, 4))
    _check(lambda t: (tape.tanh(t) * tape.sigmoid(t) + tape.softplus(t) / t).sum(), x)
    _check(lambda t: (tape.sqrt(t) + t ** 3 - tape.absolute(t - 1.0)).mean(), x)


def test_matmul_broadcast_and_reductions():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 3, 4))
    W = rng.standard_normal((4, 5))
    _check(lambda t: ((t @ W) ** 2).sum(axis=1).mean(), x)


def test_indexing_and_stacking():
    x = np.random.default_rng(2).standard_normal((5, 3))
    idx = np.array([0, 2, 2, 4])
    _check(lambda t: (tape.stack([t[idx, 0], t[1:4, 2].reshape(-1)[:3].sum() * t[idx, 1]], axis=1) ** 2).sum(), x)
    _check(lambda t: tape.concatenate([t[:, :1], t.T.reshape(-1, 1)], axis=0).sum() ** 2, x)


def test_sparse_matmul():
    A = sp.random(6, 5, density=0.5, random_state=3, format="csr")
    x = np.random.default_rng(3).standard_normal((5, 2))
    _check(lambda t: (tape.spmatmul(A, t) ** 2).sum(), x)


def test_gradient_accumulates_over_reuse():
    t = tape.Tensor(np.array([2.0]), requires_grad=True)
    (t * t + t).sum().backward()
    assert t.grad[0] == 5.0


def test_constants_do_not_track():
    out = tape.Tensor(np.ones(3)) * 2.0
    assert not out.requires_grad
