"""Finite-difference checks of the analytic loss gradients."""

import numpy as np

from oracles import finite_difference, rel_err
from pufguard.learners.logistic import logistic_loss_grad, softmax_loss_grad
from pufguard.learners.neural import mlp_loss_grad


def _data(rng, m=40, d=6):
    return rng.standard_normal((m, d))


def logistic_errors(seed, points=10, l2=0.01):
    rng = np.random.default_rng(seed)
    X = _data(rng)
    t = rng.integers(0, 2, len(X)).astype(float)
    out = []
    for _ in range(points):
        x = rng.standard_normal(X.shape[1] + 1)
        _, g = logistic_loss_grad(x, X, t, l2)
        out.append(rel_err(g, finite_difference(lambda p: logistic_loss_grad(p, X, t, l2)[0], x)))
    return out


def softmax_errors(seed, points=10, K=3, l2=0.01):
    rng = np.random.default_rng(seed)
    X = _data(rng)
    T = np.eye(K)[rng.integers(0, K, len(X))]
    out = []
    for _ in range(points):
        x = rng.standard_normal((X.shape[1] + 1) * K)
        _, g = softmax_loss_grad(x, X, T, l2)
        out.append(rel_err(g, finite_difference(lambda p: softmax_loss_grad(p, X, T, l2)[0], x)))
    return out


def mlp_errors(seed, points=10, hidden=5, out_dim=1):
    rng = np.random.default_rng(seed)
    X = _data(rng)
    d = X.shape[1]
    if out_dim == 1:
        T = rng.integers(0, 2, (len(X), 1)).astype(float)
    else:
        T = np.eye(out_dim)[rng.integers(0, out_dim, len(X))]
    shapes = [(d, hidden), (hidden,), (hidden, out_dim), (out_dim,)]
    sizes = [int(np.prod(s)) for s in shapes]

    def unflat(v):
        parts, i = [], 0
        for s, n in zip(shapes, sizes):
            parts.append(v[i:i + n].reshape(s))
            i += n
        return parts

    errs = []
    for _ in range(points):
        v = rng.standard_normal(sum(sizes))
        _, grads = mlp_loss_grad(unflat(v), X, T)
        g = np.concatenate([gr.ravel() for gr in grads])
        errs.append(rel_err(g, finite_difference(lambda p: mlp_loss_grad(unflat(p), X, T)[0], v)))
    return errs


def all_errors(seed):
    return {"lr": logistic_errors(seed), "lr-softmax": softmax_errors(seed), "nn": mlp_errors(seed),
            "nn-softmax": mlp_errors(seed, out_dim=3)}
