"""Bagged Gini decision trees.

Trees are stored as flat arrays (``feature``, ``threshold``, ``left``,
``right``, ``value``) in pre-order, with ``feature == -1`` marking leaves.
Each tree casts one vote per sample for the majority class of its leaf;
the forest's probability is the vote fraction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .base import PufClassifier


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, K) class fractions at each node

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def leaf_votes(self, X) -> np.ndarray:
        """Class index voted by the leaf each sample falls into."""
        node = np.zeros(len(X), dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active[idx] = self.feature[node[idx]] >= 0
        return leaf_class(self.value[node])


def leaf_class(value: np.ndarray) -> np.ndarray:
    # ties go to the highest class index, i.e. +1 for binary labels
    K = value.shape[1]
    return K - 1 - np.argmax(value[:, ::-1], axis=1)


def gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float(np.sum(p * p))


def _best_split_binary(Xn, Yn, feats):
    """Best split among two-valued features, all candidates at once.

    ``Xn`` holds the node's rows restricted to ``feats``. Returns the
    position in ``feats`` and the threshold, or ``None``.
    """
    lo = Xn.min(axis=0)
    hi = Xn.max(axis=0)
    ok = hi > lo
    if not ok.any():
        return None
    left_mask = (Xn == lo).astype(np.float64)
    L = Yn.T @ left_mask  # (K, m) class counts going left
    total = Yn.sum(axis=0)[:, None]
    R = total - L
    nL = L.sum(axis=0)
    nR = R.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (L * L).sum(axis=0) / nL + (R * R).sum(axis=0) / nR
    score = np.where(ok & (nL > 0) & (nR > 0), score, -np.inf)
    j = int(np.argmax(score))
    if not np.isfinite(score[j]):
        return None
    return j, 0.5 * (lo[j] + hi[j])


def _best_split_sorted(x, Yn):
    """Best threshold for one real-valued feature; returns ``(score, threshold)``."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return -np.inf, None
    L = np.cumsum(Yn[order], axis=0)[:-1]
    R = L[-1] + Yn[order[-1]] - L
    nL = np.arange(1, len(x))
    nR = len(x) - nL
    score = (L * L).sum(axis=1) / nL + (R * R).sum(axis=1) / nR
    score = np.where(valid, score, -np.inf)
    i = int(np.argmax(score))
    return score[i], 0.5 * (xs[i] + xs[i + 1])


def build_tree(X, y_index, n_classes, max_depth, max_features, rng, binary_features=False) -> Tree:
    """Grow one tree depth-first.

    At every node features are visited in random order until
    ``max_features`` non-constant ones have been scored. A node becomes a
    leaf when it is pure, at ``max_depth``, or no feature varies.
    """
    d = X.shape[1]
    Y = np.eye(n_classes)[y_index]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(counts):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return len(feature) - 1

    root_rows = np.arange(len(X))
    stack = [(root_rows, 0, None, None)]
    while stack:
        rows, depth, parent, side = stack.pop()
        counts = Y[rows].sum(axis=0)
        node = new_node(counts)
        if parent is not None:
            (left if side == "l" else right)[parent] = node
        if depth >= max_depth or np.count_nonzero(counts) <= 1 or len(rows) < 2:
            continue
        perm = rng.permutation(d)
        Xn = X[rows]
        Yn = Y[rows]
        split = None
        if binary_features:
            nonconst = perm[Xn[:, perm].min(axis=0) < Xn[:, perm].max(axis=0)][:max_features]
            if len(nonconst):
                found = _best_split_binary(Xn[:, nonconst], Yn, nonconst)
                if found is not None:
                    split = (int(nonconst[found[0]]), found[1])
        else:
            best, seen = -np.inf, 0
            for f in perm:
                score, thr = _best_split_sorted(Xn[:, f], Yn)
                if thr is None:
                    continue
                seen += 1
                if score > best:
                    best, split = score, (int(f), thr)
                if seen >= max_features:
                    break
        if split is None:
            continue
        f, thr = split
        feature[node] = f
        threshold[node] = thr
        go_left = Xn[:, f] <= thr
        # right pushed first so the left subtree is numbered first (pre-order)
        stack.append((rows[~go_left], depth + 1, node, "r"))
        stack.append((rows[go_left], depth + 1, node, "l"))
    return Tree(np.array(feature, dtype=np.intp), np.array(threshold), np.array(left, dtype=np.intp),
                np.array(right, dtype=np.intp), np.array(value))


def resolve_max_features(max_features, d: int) -> int:
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if max_features == "log2":
        return max(1, math.ceil(math.log2(d)))
    if isinstance(max_features, float):
        return max(1, min(d, math.ceil(max_features * d)))
    return max(1, min(d, int(max_features)))


class RandomForest(PufClassifier):
    """Bootstrap-aggregated Gini trees with per-split feature subsampling.

    Parameters
    ----------
    n_estimators : int
    max_depth : int or None
        ``None`` grows trees until leaves are pure.
    max_features : {"sqrt", "log2"}, int, float or None
    bootstrap : bool
    random_state : int
        Each tree gets its own child seed, so results do not depend on
        ``n_jobs``.
    n_jobs : int
        Threads used to grow trees.
    """

    kind = "rf"

    def __init__(self, n_estimators=100, max_depth=16, max_features="sqrt", bootstrap=True, random_state=0,
                 n_jobs=1):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _fit(self, X, y_index):
        m, d = X.shape
        mtry = resolve_max_features(self.max_features, d)
        depth = np.inf if self.max_depth is None else self.max_depth
        binary = len(np.unique(X)) <= 2
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_estimators)

        def grow(seed):
            rng = np.random.default_rng(seed)
            rows = rng.integers(0, m, size=m) if self.bootstrap else np.arange(m)
            return build_tree(X[rows], y_index[rows], self.n_classes_, depth, mtry, rng, binary)

        if self.n_jobs and self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                self.estimators_ = list(pool.map(grow, seeds))
        else:
            self.estimators_ = [grow(s) for s in seeds]
        return self

    def votes(self, X) -> np.ndarray:
        """``(n, K)`` count of trees voting for each class."""
        X = self._validate(X)
        counts = np.zeros((len(X), self.n_classes_))
        rows = np.arange(len(X))
        for tree in self.estimators_:
            counts[rows, tree.leaf_votes(X)] += 1
        return counts

    def _proba(self, X):
        frac = self.votes(X) / len(self.estimators_)
        return frac[:, 1] if self.n_classes_ == 2 else frac
