"""Modeling attacks on simulated PUFs.

``clone`` is the architecture-independent attack: learn challenge ->
response from eavesdropped CRPs with one generic learner. The brute-force
baseline first guesses the architecture from responses to a shared probe
set (``classify_architecture``) and then runs the cloner registered for the
guessed architecture (``brute_force_attack``), scoring the two stages with a
harmonic mean.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from sklearn.pipeline import Pipeline

from .features import AgreementProfile, encode, probe_walk
from .learners import LearnerKind, make_learner
from .puf import PufInstance, generate_crps, random_challenges
from .seeds import derive_seed

DEFAULT_ENCODING = {LearnerKind.LR: "parity", LearnerKind.RF: "combined", LearnerKind.NN: "combined"}


def default_encoding(kind) -> str:
    return DEFAULT_ENCODING[LearnerKind.parse(kind)]


@dataclass(eq=False)
class ClonedPuf:
    """A trained learner behind the same ``eval`` interface as a device."""

    learner: object
    encoding: str
    stages: int

    def eval(self, challenges, rng=None) -> np.ndarray:
        c = np.asarray(challenges)
        if c.ndim == 1:
            c = c[None, :]
        if c.shape[1] != self.stages:
            raise ValueError(f"clone expects {self.stages}-bit challenges, got {c.shape[1]}")
        return self.learner.predict(encode(c, self.encoding)).astype(np.int8)


@dataclass
class CloneResult:
    cloner: ClonedPuf
    train_size: int
    test_size: int
    test_accuracy: float
    wall_time_seconds: float
    kind: LearnerKind
    train_challenges: np.ndarray = field(repr=False)

    @property
    def cloning_error(self) -> float:
        return 1.0 - self.test_accuracy


def challenge_keys(challenges) -> set[bytes]:
    return {row.tobytes() for row in np.packbits(np.asarray(challenges, dtype=np.uint8), axis=1)}


def fresh_challenges(stages: int, count: int, rng: np.random.Generator, exclude: set[bytes]) -> np.ndarray:
    """``count`` uniform challenges, none of whose bitstrings is in ``exclude``."""
    if stages < 63 and len(exclude) >= 2 ** stages:
        raise ValueError("every challenge is excluded; nothing left to draw")
    out = np.empty((0, stages), dtype=np.uint8)
    while len(out) < count:
        batch = random_challenges(stages, max(count - len(out), 16), rng)
        packed = np.packbits(batch, axis=1)
        keep = np.array([row.tobytes() not in exclude for row in packed], dtype=bool)
        out = np.concatenate([out, batch[keep]])
    return out[:count]


def accuracy(responder, target, challenges) -> float:
    """Fraction of ``challenges`` on which two responders agree."""
    return float(np.mean(responder.eval(challenges) == target.eval(challenges)))


def fit_cloner(challenges, responses, kind, seed: int, hyper: Optional[Mapping] = None,
               encoding: Optional[str] = None) -> tuple[ClonedPuf, float]:
    """Train a cloner on given CRPs; returns it with the training wall time."""
    kind = LearnerKind.parse(kind)
    encoding = encoding or default_encoding(kind)
    challenges = np.asarray(challenges, dtype=np.uint8)
    learner = make_learner(kind, hyper, derive_seed(seed, "learner"))
    X = encode(challenges, encoding)
    start = time.perf_counter()
    learner.fit(X, responses)
    return ClonedPuf(learner, encoding, challenges.shape[1]), time.perf_counter() - start


def clone(target: PufInstance, kind, train_count: int, test_count: int, seed: int,
          hyper: Optional[Mapping] = None, encoding: Optional[str] = None,
          test_challenges: Optional[np.ndarray] = None) -> CloneResult:
    """Train a learner on ``train_count`` eavesdropped CRPs and measure it.

    Test challenges never coincide with a training challenge. When
    ``test_challenges`` is given those are used (minus collisions) instead of
    ``test_count`` fresh draws. ``wall_time_seconds`` covers training only.
    """
    if train_count < 1 or test_count < 1:
        raise ValueError("train_count and test_count must be >= 1")
    kind = LearnerKind.parse(kind)
    train = generate_crps(target, train_count, derive_seed(seed, "eavesdrop"))
    cloner, elapsed = fit_cloner(train.challenges, train.responses, kind, seed, hyper, encoding)

    seen = challenge_keys(train.challenges)
    if test_challenges is None:
        test = fresh_challenges(target.stages, test_count, np.random.default_rng(derive_seed(seed, "test")), seen)
    else:
        test = np.asarray(test_challenges, dtype=np.uint8)
        test = test[[row.tobytes() not in seen for row in np.packbits(test, axis=1)]]
        if len(test) == 0:
            raise ValueError("all supplied test challenges collide with training challenges")
    noise = np.random.default_rng(derive_seed(seed, "test-noise"))
    acc = float(np.mean(cloner.eval(test) == target.eval(test, noise)))
    return CloneResult(cloner, train_count, len(test), acc, elapsed, kind, train.challenges)


@dataclass(frozen=True)
class ClonePipeline:
    """A configured cloning attack, callable on any target."""

    kind: LearnerKind
    train_count: int
    test_count: int
    hyper: Optional[Mapping] = None
    encoding: Optional[str] = None

    def __call__(self, target: PufInstance, seed: int) -> CloneResult:
        return clone(target, self.kind, self.train_count, self.test_count, seed, self.hyper, self.encoding)


# -- architecture identification ---------------------------------------------

# a light ridge keeps the softmax head from overfitting a few hundred devices per class
CLASSIFIER_DEFAULTS = {LearnerKind.LR: {"l2": 1e-3}}


class _ConstantClassifier:
    """Degenerate classifier used when the population has a single class."""

    def __init__(self, label):
        self.classes_ = np.array([label])

    def predict(self, X):
        return np.full(len(X), self.classes_[0])


@dataclass
class ArchClassifierResult:
    classifier: object
    probe_challenges: np.ndarray
    labels: list[str]
    classification_rate: float
    per_class_rate: dict[str, float]
    confusion: np.ndarray

    def identify(self, instance) -> str:
        """Predicted architecture label of a device from its probe responses."""
        responses = instance.eval(self.probe_challenges)[None, :]
        return self.labels[int(self.classifier.predict(responses)[0])]

    def rate_for(self, label: str) -> float:
        return self.per_class_rate.get(label, self.classification_rate)


def _population_responses(population: Mapping[str, Sequence[PufInstance]], labels, probes, noise_seed):
    rng = np.random.default_rng(noise_seed)
    X, y = [], []
    for idx, label in enumerate(labels):
        for inst in population[label]:
            X.append(inst.eval(probes, rng))
            y.append(idx)
    return np.array(X, dtype=np.float64), np.array(y)


def classify_architecture(population: Mapping[str, Sequence[PufInstance]], probe_count: int, kind, seed: int,
                          hyper: Optional[Mapping] = None,
                          eval_population: Optional[Mapping[str, Sequence[PufInstance]]] = None,
                          holdout: float = 0.3, features: str = "profile", shuffle_labels: bool = False,
                          profile_distance: int = 2, profile_buckets: int = 8,
                          probe_tail_rate: float = 0.2) -> ArchClassifierResult:
    """Learn to name a device's architecture from its probe responses.

    Each device is represented by its +-1 responses to one shared probe set,
    drawn as a random walk (see :func:`probe_walk`). With
    ``features="profile"`` the classifier sees the agreement profile of those
    responses; ``"responses"`` feeds the raw vector. Whole devices are held
    out for evaluation: either ``eval_population`` or a ``holdout`` fraction
    of each class. ``shuffle_labels`` permutes training labels (chance
    baseline ablation).
    """
    labels = list(population)
    if not labels:
        raise ValueError("population is empty")
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    stages = {inst.stages for group in population.values() for inst in group}
    if len(stages) != 1:
        raise ValueError("all instances must share one stage count")
    stages = stages.pop()

    if eval_population is None:
        for label in labels:
            if len(population[label]) < 2:
                raise ValueError(f"class {label!r} needs at least 2 instances")
        train_pop, eval_pop = {}, {}
        for label in labels:
            group = list(population[label])
            n_eval = min(len(group) - 1, max(1, int(round(holdout * len(group)))))
            train_pop[label], eval_pop[label] = group[:-n_eval], group[-n_eval:]
    else:
        train_pop = {label: list(population[label]) for label in labels}
        eval_pop = {label: list(eval_population.get(label, [])) for label in labels}
        for label in labels:
            if len(train_pop[label]) < 1:
                raise ValueError(f"class {label!r} has no training instances")

    probes = probe_walk(stages, probe_count, np.random.default_rng(derive_seed(seed, "probes")), probe_tail_rate)
    X, y = _population_responses(train_pop, labels, probes, derive_seed(seed, "train-noise"))
    Xe, ye = _population_responses(eval_pop, labels, probes, derive_seed(seed, "eval-noise"))
    if shuffle_labels:
        y = np.random.default_rng(derive_seed(seed, "shuffle")).permutation(y)

    if len(np.unique(y)) < 2:
        clf = _ConstantClassifier(int(y[0]))
    else:
        if hyper is None:
            hyper = CLASSIFIER_DEFAULTS.get(LearnerKind.parse(kind))
        learner = make_learner(kind, hyper, derive_seed(seed, "classifier"))
        if features == "profile":
            steps = [("profile", AgreementProfile(probes, profile_distance, profile_buckets)), ("learner", learner)]
        elif features == "responses":
            steps = [("learner", learner)]
        else:
            raise ValueError(f"unknown classifier features {features!r}")
        clf = Pipeline(steps).fit(X, y)

    K = len(labels)
    confusion = np.zeros((K, K), dtype=int)
    if len(Xe):
        pred = np.asarray(clf.predict(Xe), dtype=int)
        np.add.at(confusion, (ye, pred), 1)
        rate = float(np.trace(confusion) / confusion.sum())
    else:
        rate = float("nan")
    per_class = {label: float(confusion[i, i] / confusion[i].sum())
                 for i, label in enumerate(labels) if confusion[i].sum()}
    return ArchClassifierResult(clf, probes, labels, rate, per_class, confusion)


# -- brute force ----------------------------------------------------------------

def harmonic_mean(a: float, b: float) -> float:
    if a < 0 or b < 0:
        raise ValueError("harmonic_mean takes non-negative arguments")
    return 0.0 if a + b == 0 else 2.0 * a * b / (a + b)


@dataclass
class BruteForceScore:
    true_label: str
    predicted_label: str
    classification_rate: float
    per_arch_cloning_rate: float
    combined: float
    clone_result: Optional[CloneResult] = field(default=None, repr=False)

    @property
    def misrouted(self) -> bool:
        return self.predicted_label != self.true_label


def brute_force_attack(target: PufInstance, classifier: ArchClassifierResult,
                       per_arch_cloners: Mapping[str, Callable[[PufInstance, int], CloneResult]],
                       seed: int) -> BruteForceScore:
    """Two-stage attack: identify the architecture, then clone with its pipeline.

    The classification operand is the classifier's held-out rate for the
    target's true architecture (its overall rate if that class is unknown).
    A misidentified target is still cloned, with the wrong pipeline, and
    the score is flagged ``misrouted``.
    """
    predicted = classifier.identify(target)
    if predicted not in per_arch_cloners:
        raise KeyError(f"no cloner registered for predicted architecture {predicted!r}")
    result = per_arch_cloners[predicted](target, seed)
    rate = classifier.rate_for(target.label)
    return BruteForceScore(target.label, predicted, rate, result.test_accuracy,
                           harmonic_mean(rate, result.test_accuracy), result)
