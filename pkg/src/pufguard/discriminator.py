"""Authentic-vs-cloned discrimination over batches of probe responses.

A verifier holds enrolment data for the authentic device. For every probe
batch it compares the responses it receives with the enrolled ones; the
sample handed to the discriminator is the element-wise product of the two,
so +1 marks agreement and -1 a mismatch. Authentic samples are fresh reads
of the device itself, cloned samples come from the attacker's model.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .attacks import CloneResult, challenge_keys, clone, fresh_challenges
from .learners import LearnerKind, make_learner
from .puf import PufInstance
from .seeds import derive_seed

AUTHENTIC, CLONED = 1, -1


class BitFlipClone:
    """Synthetic clone that disagrees with ``original`` on a fixed fraction of challenges.

    Whether a challenge is flipped is a pure function of the challenge and
    ``seed``, so the clone is deterministic like a trained model.
    """

    def __init__(self, original: PufInstance, flip_rate: float, seed: int = 0):
        if not 0.0 <= flip_rate <= 1.0:
            raise ValueError("flip_rate must lie in [0, 1]")
        self.original = original
        self.flip_rate = flip_rate
        self.seed = seed
        self.stages = original.stages

    def _uniform(self, challenges) -> np.ndarray:
        salt = int(self.seed).to_bytes(8, "little", signed=False)
        packed = np.packbits(np.asarray(challenges, dtype=np.uint8), axis=1)
        return np.array([int.from_bytes(hashlib.blake2b(row.tobytes(), digest_size=8, key=salt).digest(), "little")
                         / 2.0 ** 64 for row in packed])

    def eval(self, challenges, rng=None) -> np.ndarray:
        c = np.atleast_2d(challenges)
        r = self.original.eval(c, rng)
        return np.where(self._uniform(c) < self.flip_rate, -r, r).astype(np.int8)


@dataclass
class DiscriminatorDataset:
    vectors: np.ndarray  # (m, width) of +-1
    labels: np.ndarray  # +1 authentic, -1 cloned
    batch_ids: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.int8)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        self.batch_ids = np.asarray(self.batch_ids)
        if self.vectors.ndim != 2 or len(self.vectors) != len(self.labels):
            raise ValueError("vectors must be (count, width) with one label per row")

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.labels)

    def subset(self, mask) -> "DiscriminatorDataset":
        return DiscriminatorDataset(self.vectors[mask], self.labels[mask], self.batch_ids[mask])


def build_discriminator_dataset(original: PufInstance, clone, batch_width: int, batch_count: int, seed: int,
                                exclude: Optional[set[bytes]] = None) -> DiscriminatorDataset:
    """One authentic and one cloned sample per fresh probe batch.

    ``clone`` is anything with ``eval(challenges)`` and ``stages``: a
    :class:`~pufguard.attacks.ClonedPuf`, another device, or a
    :class:`BitFlipClone`. Probe challenges avoid ``exclude`` (typically the
    cloner's training set).
    """
    if batch_width < 1:
        raise ValueError("batch_width must be >= 1")
    if batch_count < 2:
        raise ValueError("batch_count must be >= 2")
    if getattr(clone, "stages", original.stages) != original.stages:
        raise ValueError(f"clone answers {clone.stages}-bit challenges but the device has {original.stages} stages")
    rng = np.random.default_rng(derive_seed(seed, "probe-batches"))
    enrol_rng = np.random.default_rng(derive_seed(seed, "enrolment-noise"))
    read_rng = np.random.default_rng(derive_seed(seed, "read-noise"))
    challenges = fresh_challenges(original.stages, batch_width * batch_count, rng, exclude or set())
    reference = original.eval(challenges, enrol_rng).reshape(batch_count, batch_width)
    authentic = original.eval(challenges, read_rng).reshape(batch_count, batch_width)
    cloned = np.asarray(clone.eval(challenges)).reshape(batch_count, batch_width)
    vectors = np.empty((2 * batch_count, batch_width), dtype=np.int8)
    vectors[0::2] = authentic * reference
    vectors[1::2] = cloned * reference
    labels = np.tile([AUTHENTIC, CLONED], batch_count)
    return DiscriminatorDataset(vectors, labels, np.repeat(np.arange(batch_count), 2))


@dataclass
class DiscriminatorModel:
    learner: object
    width: int
    threshold: float = 0.5
    holdout_accuracy: Optional[float] = None
    holdout_scores: Optional[np.ndarray] = field(default=None, repr=False)
    holdout_labels: Optional[np.ndarray] = field(default=None, repr=False)
    train_seconds: float = 0.0


def train_discriminator(train_set: DiscriminatorDataset, kind, hyper: Optional[Mapping] = None, seed: int = 0,
                        eval_set: Optional[DiscriminatorDataset] = None, holdout: float = 0.5) -> DiscriminatorModel:
    """Fit a binary learner with authentic = +1 and report held-out accuracy.

    Without ``eval_set`` the last ``holdout`` fraction of batches is held out;
    both samples of a batch always land on the same side.
    """
    if eval_set is None:
        batches = np.unique(train_set.batch_ids)
        n_eval = int(round(holdout * len(batches)))
        cut = batches[len(batches) - n_eval] if n_eval else np.inf
        eval_set = train_set.subset(train_set.batch_ids >= cut)
        train_set = train_set.subset(train_set.batch_ids < cut)
    if len(np.unique(train_set.labels)) < 2:
        raise ValueError("discriminator training needs both authentic and cloned samples")
    if eval_set is not None and len(eval_set) and eval_set.width != train_set.width:
        raise ValueError("train and eval samples differ in width")
    learner = make_learner(kind, hyper, seed)
    start = time.perf_counter()
    learner.fit(train_set.vectors.astype(np.float64), train_set.labels)
    elapsed = time.perf_counter() - start
    model = DiscriminatorModel(learner, train_set.width, train_seconds=elapsed)
    if len(eval_set):
        s = score(model, eval_set.vectors)
        model.holdout_scores = s
        model.holdout_labels = eval_set.labels
        model.holdout_accuracy = float(np.mean(np.where(s >= model.threshold, AUTHENTIC, CLONED) == eval_set.labels))
    return model


def score(model: DiscriminatorModel, vectors) -> np.ndarray:
    """Probability that each agreement vector comes from the authentic device."""
    V = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if V.shape[1] != model.width:
        raise ValueError(f"expected vectors of width {model.width}, got {V.shape[1]}")
    return model.learner.decision_proba(V)


def is_authentic(model: DiscriminatorModel, vectors) -> np.ndarray:
    return score(model, vectors) >= model.threshold


def agreement(responses, reference) -> np.ndarray:
    """Agreement vector of observed responses against enrolled ones."""
    return (np.asarray(responses, dtype=np.int8) * np.asarray(reference, dtype=np.int8)).astype(np.int8)


# -- grid search -------------------------------------------------------------------

KINDS = (LearnerKind.LR, LearnerKind.RF, LearnerKind.NN)


@dataclass
class GridCell:
    cm: LearnerKind
    dm: LearnerKind
    cloning_accuracy: float
    discriminator_accuracy: float
    cloning_seconds: float
    discriminator_seconds: float

    @property
    def single_model(self) -> bool:
        """Same learner family for both tasks (the "only X" configurations)."""
        return self.cm is self.dm


@dataclass
class GridSearchReport:
    cells: dict = field(default_factory=dict)  # (cm, dm) -> GridCell

    def ordered(self) -> list[GridCell]:
        return [self.cells[(cm, dm)] for cm in KINDS for dm in KINDS]

    def single_model(self) -> list[GridCell]:
        return [self.cells[(k, k)] for k in KINDS]

    def best_cloning(self) -> GridCell:
        return max(self.ordered(), key=lambda c: c.cloning_accuracy)

    def best_discriminator(self) -> GridCell:
        return max(self.ordered(), key=lambda c: c.discriminator_accuracy)


def grid_search(target: PufInstance, train_count: int, batch_width: int, batch_count: int, seed: int,
                test_count: int = 2000, hypers: Optional[Mapping] = None, encodings: Optional[Mapping] = None,
                threads: int = 1, cell_order=None) -> GridSearchReport:
    """Every (cloning model, discriminator model) pair over LR, RF and NN.

    Each clone and each cell draws its randomness from seeds derived from
    ``seed`` and the cell's kinds, so the report does not depend on
    ``threads`` or ``cell_order``. Discriminator probes avoid the clone's
    training challenges; half of the ``batch_count`` batches are held out.
    """
    hypers = {LearnerKind.parse(k): v for k, v in (hypers or {}).items()}
    encodings = {LearnerKind.parse(k): v for k, v in (encodings or {}).items()}

    def run_clone(cm) -> CloneResult:
        return clone(target, cm, train_count, test_count, derive_seed(seed, "clone", cm.value),
                     hypers.get(cm), encodings.get(cm))

    def run_cell(cm, dm, result: CloneResult) -> GridCell:
        cell_seed = derive_seed(seed, "disc", cm.value, dm.value)
        data = build_discriminator_dataset(target, result.cloner, batch_width, batch_count, cell_seed,
                                           challenge_keys(result.train_challenges))
        model = train_discriminator(data, dm, hypers.get(dm), derive_seed(cell_seed, "learner"))
        return GridCell(cm, dm, result.test_accuracy, model.holdout_accuracy, result.wall_time_seconds,
                        model.train_seconds)

    pairs = list(cell_order) if cell_order is not None else [(cm, dm) for cm in KINDS for dm in KINDS]
    pairs = [(LearnerKind.parse(a), LearnerKind.parse(b)) for a, b in pairs]
    cms = list(dict.fromkeys(cm for cm, _ in pairs))
    with ThreadPoolExecutor(max(1, threads)) as pool:
        clones = dict(zip(cms, pool.map(run_clone, cms)))
        cells = list(pool.map(lambda p: run_cell(p[0], p[1], clones[p[0]]), pairs))
    report = GridSearchReport()
    for (cm, dm), cell in zip(pairs, cells):
        report.cells[(cm, dm)] = cell
    return report
