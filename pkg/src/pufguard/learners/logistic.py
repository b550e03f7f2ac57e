"""Logistic regression trained by full-batch resilient backpropagation."""

from __future__ import annotations

import numpy as np

from .base import PufClassifier, sigmoid, softmax


def logistic_loss_grad(params, X, t, l2=0.0):
    """Mean logistic loss and gradient; ``params = [w..., bias]``, ``t`` in {0, 1}."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - t * z) + 0.5 * l2 * (w @ w)
    r = (sigmoid(z) - t) / len(t)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return loss, grad


def softmax_loss_grad(params, X, T, l2=0.0):
    """Mean cross-entropy of a softmax head; ``params`` is ``(d+1) x K`` flattened, ``T`` one-hot."""
    d, K = X.shape[1], T.shape[1]
    P = params.reshape(d + 1, K)
    W, b = P[:-1], P[-1]
    Z = X @ W + b
    Z = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(Z).sum(axis=1))
    loss = np.mean(logsum - (Z * T).sum(axis=1)) + 0.5 * l2 * np.sum(W * W)
    R = (softmax(Z) - T) / len(T)
    grad = np.empty_like(P)
    grad[:-1] = X.T @ R + l2 * W
    grad[-1] = R.sum(axis=0)
    return loss, grad.ravel()


def rprop_minimize(fun, x0, max_epochs=1000, tol=1e-6, eta_plus=1.2, eta_minus=0.5,
                   delta0=0.1, delta_max=50.0, delta_min=1e-6):
    """Minimize ``fun(x) -> (loss, grad)`` with sign-based RProp steps.

    A step that raises the loss is rejected and the weights stay put
    (weight backtracking), so the loss over accepted epochs never increases.
    Step sizes grow by ``eta_plus`` while a gradient component keeps its sign
    and shrink by ``eta_minus`` when it flips. Stops when an accepted step
    improves the loss by less than ``tol``.

    Returns ``(x, losses)`` where ``losses`` lists the accepted loss values.
    """
    x = np.array(x0, dtype=np.float64)
    loss, grad = fun(x)
    delta = np.full_like(x, delta0)
    losses = [loss]
    for _ in range(max_epochs):
        if not np.any(grad):
            break
        x_new = x - np.sign(grad) * delta
        loss_new, grad_new = fun(x_new)
        flipped = grad * grad_new < 0
        if loss_new <= loss:
            delta = np.where(flipped, delta * eta_minus, np.where(grad * grad_new > 0, delta * eta_plus, delta))
            delta = np.clip(delta, delta_min, delta_max)
            improvement = loss - loss_new
            x, loss, grad = x_new, loss_new, grad_new
            losses.append(loss)
            if improvement < tol:
                break
        else:
            shrink = flipped if flipped.any() else np.ones_like(flipped)
            delta = np.where(shrink, np.maximum(delta * eta_minus, delta_min), delta)
            if np.all(delta <= delta_min):
                break
    return x, losses


class LogisticRegression(PufClassifier):
    """Linear classifier with a sigmoid head (softmax for more than two classes).

    Parameters
    ----------
    max_epochs : int
        Cap on RProp iterations (each one a full pass over the data).
    tol : float
        Minimum loss improvement of an accepted step before stopping.
    l2 : float
        Optional ridge penalty on the weights (not the bias).
    eta_plus, eta_minus, delta0, delta_max, delta_min : float
        RProp step-size constants.
    """

    kind = "lr"

    def __init__(self, max_epochs=1000, tol=1e-6, l2=0.0, eta_plus=1.2, eta_minus=0.5,
                 delta0=0.1, delta_max=50.0, delta_min=1e-6):
        self.max_epochs = max_epochs
        self.tol = tol
        self.l2 = l2
        self.eta_plus = eta_plus
        self.eta_minus = eta_minus
        self.delta0 = delta0
        self.delta_max = delta_max
        self.delta_min = delta_min

    def _fit(self, X, y_index):
        d = X.shape[1]
        opts = dict(max_epochs=self.max_epochs, tol=self.tol, eta_plus=self.eta_plus, eta_minus=self.eta_minus,
                    delta0=self.delta0, delta_max=self.delta_max, delta_min=self.delta_min)
        if self.n_classes_ == 2:
            t = y_index.astype(np.float64)
            params, self.loss_curve_ = rprop_minimize(lambda p: logistic_loss_grad(p, X, t, self.l2),
                                                      np.zeros(d + 1), **opts)
            self.coef_, self.intercept_ = params[:-1], params[-1]
        else:
            K = self.n_classes_
            T = np.eye(K)[y_index]
            params, self.loss_curve_ = rprop_minimize(lambda p: softmax_loss_grad(p, X, T, self.l2),
                                                      np.zeros((d + 1) * K), **opts)
            P = params.reshape(d + 1, K)
            self.coef_, self.intercept_ = P[:-1], P[-1]
        self.n_epochs_ = len(self.loss_curve_) - 1
        return self

    def _proba(self, X):
        z = X @ self.coef_ + self.intercept_
        return sigmoid(z) if self.n_classes_ == 2 else softmax(z)

    @classmethod
    def from_params(cls, coef, intercept, classes=(-1, 1), **hyper):
        """Build a fitted model directly from weights."""
        model = cls(**hyper)
        model.coef_ = np.asarray(coef, dtype=np.float64)
        model.intercept_ = np.asarray(intercept, dtype=np.float64) if np.ndim(intercept) else float(intercept)
        model.classes_ = np.asarray(classes)
        model.n_features_in_ = model.coef_.shape[0]
        return model
