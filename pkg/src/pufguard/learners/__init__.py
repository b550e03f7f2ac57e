"""The three learner families and a kind-keyed training interface."""

from __future__ import annotations

import enum
from typing import Mapping, Optional

import numpy as np

from .base import PufClassifier, encode_targets, sigmoid, softmax
from .forest import RandomForest
from .logistic import LogisticRegression, logistic_loss_grad, rprop_minimize, softmax_loss_grad
from .neural import NeuralNetwork, mlp_loss_grad


class LearnerKind(str, enum.Enum):
    LR = "lr"
    RF = "rf"
    NN = "nn"

    @classmethod
    def parse(cls, value) -> "LearnerKind":
        if isinstance(value, LearnerKind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown learner kind {value!r}; expected lr, rf or nn") from None

    @property
    def display(self) -> str:
        return self.value.upper()


_CLASSES = {LearnerKind.LR: LogisticRegression, LearnerKind.RF: RandomForest, LearnerKind.NN: NeuralNetwork}


def make_learner(kind, hyper: Optional[Mapping] = None, seed: int = 0) -> PufClassifier:
    """Unfitted learner of ``kind`` with hyperparameters ``hyper``."""
    cls = _CLASSES[LearnerKind.parse(kind)]
    params = dict(hyper or {})
    if "random_state" in cls().get_params():
        params.setdefault("random_state", int(seed))
    return cls(**params)


def train(kind, X, y, hyper: Optional[Mapping] = None, seed: int = 0) -> PufClassifier:
    """Fit a binary learner on labels in {-1, +1}."""
    y = np.asarray(y)
    if y.size and not np.all(np.isin(y, (-1, 1))):
        raise ValueError("binary training labels must be -1 or +1")
    return make_learner(kind, hyper, seed).fit(X, y)


def train_multiclass(X, y, kind, hyper: Optional[Mapping] = None, seed: int = 0) -> PufClassifier:
    """Fit a K-way learner on class indices ``0..K-1``; ``predict`` returns the argmax class."""
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        raise ValueError("multiclass training needs at least 2 classes present")
    return make_learner(kind, hyper, seed).fit(X, y)


def predict(model: PufClassifier, X) -> np.ndarray:
    return model.predict(X)


def predict_proba(model: PufClassifier, X) -> np.ndarray:
    """Probability of +1 for binary models (a vector)."""
    return model.decision_proba(X)


__all__ = [
    "LearnerKind", "LogisticRegression", "NeuralNetwork", "RandomForest", "PufClassifier",
    "make_learner", "train", "train_multiclass", "predict", "predict_proba",
    "logistic_loss_grad", "softmax_loss_grad", "mlp_loss_grad", "rprop_minimize",
    "encode_targets", "sigmoid", "softmax",
]
