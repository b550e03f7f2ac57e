"""Challenge encodings consumed by the learners.

Both encodings are available as plain functions and as stateless
scikit-learn transformers so they can sit at the head of a ``Pipeline``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin


def _bits(challenges) -> np.ndarray:
    c = np.asarray(challenges)
    if c.size and (c.min() < 0 or c.max() > 1):
        raise ValueError("challenge bits must be 0 or 1")
    return c


def raw_transform(challenges) -> np.ndarray:
    """Map each bit ``b`` to ``1 - 2b``; works on one challenge or a batch."""
    return 1.0 - 2.0 * _bits(challenges).astype(np.float64)


def parity_transform(challenges) -> np.ndarray:
    """Parity features: ``phi_i = prod_{j >= i} (1 - 2 c_j)`` with a trailing 1.

    Computed as a reversed cumulative product. Output has one more column
    than the input.
    """
    s = raw_transform(challenges)
    suffix = np.cumprod(s[..., ::-1], axis=-1)[..., ::-1]
    ones = np.ones(s.shape[:-1] + (1,))
    return np.concatenate([suffix, ones], axis=-1)


def bits_from_raw(values) -> np.ndarray:
    return np.rint((1.0 - np.asarray(values, dtype=np.float64)) / 2.0).astype(np.uint8)


class ParityFeatures(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`parity_transform`."""

    def fit(self, X, y=None):
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X):
        return parity_transform(X)


class RawFeatures(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`raw_transform`."""

    def fit(self, X, y=None):
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X):
        return raw_transform(X)


def combined_transform(challenges) -> np.ndarray:
    """Raw and parity features side by side (``2n + 1`` columns).

    Arbiter and XOR chains are linear in the parity features while every
    Lightweight chain is linear in a cyclic shift of the raw features, so a
    learner given both does not need to know which family it faces.
    """
    return np.concatenate([raw_transform(challenges), parity_transform(challenges)], axis=-1)


ENCODINGS = {"parity": parity_transform, "raw": raw_transform, "combined": combined_transform}


def encode(challenges, encoding: str) -> np.ndarray:
    try:
        return ENCODINGS[encoding](challenges)
    except KeyError:
        raise ValueError(f"unknown encoding {encoding!r}; expected one of {sorted(ENCODINGS)}") from None


class Encoder(TransformerMixin, BaseEstimator):
    """Challenge bits to features using one of the named encodings."""

    def __init__(self, encoding="parity"):
        self.encoding = encoding

    def fit(self, X, y=None):
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X):
        return encode(X, self.encoding)


def probe_walk(stages: int, count: int, rng: np.random.Generator, tail_rate: float = 0.2) -> np.ndarray:
    """Probe challenges forming a random walk with one bit flipped per step.

    With probability ``tail_rate`` a step flips the last bit, otherwise a
    uniformly chosen other bit. Consecutive probes are close in Hamming
    distance, so their responses are correlated in an
    architecture-dependent way.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    c = rng.integers(0, 2, size=stages, dtype=np.uint8)
    out = np.empty((count, stages), dtype=np.uint8)
    out[0] = c
    for i in range(1, count):
        j = stages - 1 if rng.random() < tail_rate else int(rng.integers(0, stages - 1))
        c[j] ^= 1
        out[i] = c
    return out


class AgreementProfile(TransformerMixin, BaseEstimator):
    """Summarise a response vector by how often nearby probes agree.

    Probe pairs at Hamming distance ``1..max_distance`` are grouped by their
    distance and by which of ``n_buckets`` equal slices of the challenge
    holds their highest differing bit. Each output column is the mean of
    ``r_i * r_j`` over one group. Input rows are +-1 responses to
    ``probes``, in order. With ``include_mean`` a leading column holds the
    mean response itself, which the pairwise products cannot see.
    """

    def __init__(self, probes=None, max_distance=2, n_buckets=8, include_mean=True):
        self.probes = probes
        self.max_distance = max_distance
        self.n_buckets = n_buckets
        self.include_mean = include_mean

    def fit(self, X=None, y=None):
        P = np.asarray(self.probes, dtype=np.uint8)
        stages = P.shape[1]
        diff = P[:, None, :] != P[None, :, :]
        dist = diff.sum(axis=-1)
        top = np.where(diff, np.arange(stages), -1).max(axis=-1)
        groups = []
        for d in range(1, self.max_distance + 1):
            i, j = np.nonzero(np.triu(dist == d))
            bucket = top[i, j] * self.n_buckets // stages
            for b in range(self.n_buckets):
                sel = bucket == b
                if sel.any():
                    groups.append((i[sel], j[sel]))
        if not groups:
            raise ValueError("no probe pairs within max_distance; probes need near neighbours")
        self.groups_ = groups
        self.n_features_in_ = len(P)
        return self

    def transform(self, X):
        R = np.asarray(X, dtype=np.float64)
        if R.ndim != 2 or R.shape[1] != self.n_features_in_:
            raise ValueError(f"expected responses to {self.n_features_in_} probes")
        cols = [(R[:, i] * R[:, j]).mean(axis=1) for i, j in self.groups_]
        if self.include_mean:
            cols.insert(0, R.mean(axis=1))
        return np.column_stack(cols)
