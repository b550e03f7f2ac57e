from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

BINARY_LABELS = np.array([-1, 1])


def sigmoid(z):
    # split form avoids overflow in exp for large |z|
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def encode_targets(y) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(classes, y_index)``.

    Labels drawn from {-1, +1} always map to the binary label set, so a
    training set holding only +1 still yields a two-class model. Any other
    label set must contain at least two classes.
    """
    y = column_or_1d(y, warn=True)
    if y.size == 0:
        raise ValueError("empty label vector")
    labels = np.unique(y)
    if np.all(np.isin(labels, BINARY_LABELS)):
        classes = BINARY_LABELS.copy()
    else:
        classes = labels
        if len(classes) < 2:
            raise ValueError(f"need at least 2 classes, got {len(classes)}")
    return classes, np.searchsorted(classes, y)


class PufClassifier(ClassifierMixin, BaseEstimator):
    """Shared predict / predict_proba logic for the three learner kinds.

    Subclasses implement ``_fit(X, y_index)`` and ``_proba(X)``; the latter
    returns ``P(class index 1)`` as a vector for two classes and the full
    ``(n, K)`` matrix otherwise.
    """

    kind: str = ""

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        y = column_or_1d(y)
        if len(y) != X.shape[0]:
            raise ValueError(f"{X.shape[0]} samples but {len(y)} labels")
        self.classes_, y_index = encode_targets(y)
        self.n_features_in_ = X.shape[1]
        self._fit(X, y_index)
        return self

    @property
    def n_classes_(self) -> int:
        return len(self.classes_)

    def _validate(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def predict_proba(self, X):
        p = self._proba(self._validate(X))
        if self.n_classes_ == 2:
            return np.column_stack([1.0 - p, p])
        return p

    def predict(self, X):
        p = self._proba(self._validate(X))
        if self.n_classes_ == 2:
            return self.classes_[(p >= 0.5).astype(int)]
        return self.classes_[np.argmax(p, axis=1)]

    def decision_proba(self, X):
        """Probability of the positive (last) class; binary models only."""
        if self.n_classes_ != 2:
            raise ValueError("decision_proba is defined for binary models only")
        return self._proba(self._validate(X))
