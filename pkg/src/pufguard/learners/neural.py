"""One-hidden-layer feed-forward network: tanh hidden units, sigmoid/softmax output."""

from __future__ import annotations

import numpy as np

from .base import PufClassifier, sigmoid, softmax


def mlp_forward(params, X):
    W1, b1, W2, b2 = params
    H = np.tanh(X @ W1 + b1)
    return H, H @ W2 + b2


def mlp_loss_grad(params, X, T):
    """Mean cross-entropy and gradients for ``params = (W1, b1, W2, b2)``.

    With one output column ``T`` holds {0, 1} targets for a sigmoid head;
    with several it is one-hot for a softmax head.
    """
    W1, b1, W2, b2 = params
    H, Z = mlp_forward(params, X)
    m = len(X)
    if Z.shape[1] == 1:
        z = Z[:, 0]
        t = T[:, 0]
        loss = np.mean(np.logaddexp(0.0, z) - t * z)
        dZ = ((sigmoid(z) - t) / m)[:, None]
    else:
        Zs = Z - Z.max(axis=1, keepdims=True)
        loss = np.mean(np.log(np.exp(Zs).sum(axis=1)) - (Zs * T).sum(axis=1))
        dZ = (softmax(Z) - T) / m
    gW2 = H.T @ dZ
    gb2 = dZ.sum(axis=0)
    dA = (dZ @ W2.T) * (1.0 - H * H)
    gW1 = X.T @ dA
    gb1 = dA.sum(axis=0)
    return loss, [gW1, gb1, gW2, gb2]


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class NeuralNetwork(PufClassifier):
    """Mini-batch trained single-hidden-layer network.

    Parameters
    ----------
    hidden : int or None
        Hidden width; ``None`` uses the input dimension.
    learning_rate : float
    batch_size : int
    max_epochs : int
    optimizer : {"sgd", "adam"}
    tol : float or None
        Stop once an epoch improves the mean training loss by less than this.
    random_state : int
        Seeds weight initialisation and batch shuffling.
    """

    kind = "nn"

    def __init__(self, hidden=None, learning_rate=0.01, batch_size=64, max_epochs=200, optimizer="sgd",
                 tol=None, random_state=0):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.optimizer = optimizer
        self.tol = tol
        self.random_state = random_state

    def _init_params(self, d, out, rng):
        h = self.hidden or d
        bound1, bound2 = 1.0 / np.sqrt(d), 1.0 / np.sqrt(h)
        return [
            rng.uniform(-bound1, bound1, size=(d, h)),
            rng.uniform(-bound1, bound1, size=h),
            rng.uniform(-bound2, bound2, size=(h, out)),
            rng.uniform(-bound2, bound2, size=out),
        ]

    def _fit(self, X, y_index):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        rng = np.random.default_rng(self.random_state)
        K = self.n_classes_
        T = y_index[:, None].astype(np.float64) if K == 2 else np.eye(K)[y_index]
        params = self._init_params(X.shape[1], T.shape[1], rng)
        opt = _Adam(params, self.learning_rate) if self.optimizer == "adam" else _SGD(params, self.learning_rate)
        m = len(X)
        bs = max(1, int(self.batch_size))
        self.loss_curve_ = []
        for _ in range(self.max_epochs):
            order = rng.permutation(m)
            total = 0.0
            for start in range(0, m, bs):
                idx = order[start:start + bs]
                loss, grads = mlp_loss_grad(params, X[idx], T[idx])
                total += loss * len(idx)
                opt.step(params, grads)
            self.loss_curve_.append(total / m)
            if self.tol is not None and len(self.loss_curve_) > 1 \
                    and self.loss_curve_[-2] - self.loss_curve_[-1] < self.tol:
                break
        if K == 2 and np.all(y_index == y_index[0]):
            # one observed label: the likelihood is maximised by a saturated constant output
            params[2][:] = 0.0
            params[3][:] = 10.0 if y_index[0] == 1 else -10.0
        self.coefs_ = [params[0], params[2]]
        self.intercepts_ = [params[1], params[3]]
        return self

    @property
    def params_(self):
        return [self.coefs_[0], self.intercepts_[0], self.coefs_[1], self.intercepts_[1]]

    def _proba(self, X):
        _, Z = mlp_forward(self.params_, X)
        return sigmoid(Z[:, 0]) if self.n_classes_ == 2 else softmax(Z)
