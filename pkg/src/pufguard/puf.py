"""Additive-delay simulation of Arbiter, XOR Arbiter and Lightweight XOR PUFs.

Every chain computes ``sign(w . phi(g(c)) + noise)`` where ``phi`` is the
parity transform and ``g`` the per-chain input mapping (identity for the
Arbiter and XOR families). Chain outputs are combined by multiplying their
signs, which is XOR in the {-1, +1} encoding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import parity_transform

MAX_XOR = 6


class Arch(str, enum.Enum):
    ARBITER = "arbiter"
    XOR = "xor"
    LIGHTWEIGHT = "lw"

    @classmethod
    def parse(cls, value: "Arch | str") -> "Arch":
        if isinstance(value, Arch):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown architecture {value!r}; expected one of arbiter, xor, lw") from None


def arch_label(arch: "Arch | str", k: int) -> str:
    """Short human label used in reports, e.g. ``APUF``, ``3-XOR``, ``LW-4``."""
    arch = Arch.parse(arch)
    if arch is Arch.ARBITER:
        return "APUF"
    if arch is Arch.XOR:
        return f"{k}-XOR"
    return f"LW-{k}"


def check_arch(arch: "Arch | str", stages: int, k: int) -> Arch:
    arch = Arch.parse(arch)
    if int(stages) < 2:
        raise ValueError(f"stages must be >= 2, got {stages}")
    if arch is Arch.ARBITER and k != 1:
        raise ValueError(f"an arbiter PUF has exactly one chain, got k={k}")
    if arch is not Arch.ARBITER and not 2 <= k <= MAX_XOR:
        raise ValueError(f"{arch.value} PUF needs 2 <= k <= {MAX_XOR}, got k={k}")
    return arch


def lightweight_map(challenges: np.ndarray, chain: int) -> np.ndarray:
    """Input network of chain ``chain`` of a Lightweight XOR PUF.

    Output bit ``i < n-1`` is ``c[(i+l) % n] ^ c[(i+l+1) % n]``; the last bit
    is ``c[(n-1+l) % n]``.
    """
    c = np.asarray(challenges, dtype=np.uint8)
    n = c.shape[-1]
    idx = (np.arange(n) + chain) % n
    out = np.empty_like(c)
    out[..., : n - 1] = c[..., idx[: n - 1]] ^ c[..., (idx[: n - 1] + 1) % n]
    out[..., n - 1] = c[..., idx[n - 1]]
    return out


@dataclass(frozen=True, eq=False)
class PufInstance:
    """One simulated device. Immutable; safe to evaluate from many threads."""

    arch: Arch
    stages: int
    weights: np.ndarray
    noise_sigma: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, ndmin=2)
        arch = check_arch(self.arch, self.stages, w.shape[0])
        if w.shape[1] != self.stages + 1:
            raise ValueError(f"weight rows must have length stages + 1 = {self.stages + 1}, got {w.shape[1]}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "arch", arch)
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def label(self) -> str:
        return arch_label(self.arch, self.k)

    def chain_inputs(self, challenges: np.ndarray, chain: int) -> np.ndarray:
        if self.arch is Arch.LIGHTWEIGHT:
            return lightweight_map(challenges, chain)
        return challenges

    def delay_differences(self, challenges: np.ndarray) -> np.ndarray:
        """Noiseless per-chain delay differences, shape ``(m, k)``."""
        c = _as_challenges(challenges, self.stages)
        out = np.empty((c.shape[0], self.k))
        for chain in range(self.k):
            out[:, chain] = parity_transform(self.chain_inputs(c, chain)) @ self.weights[chain]
        return out

    def eval(self, challenges: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Responses in {-1, +1} (int8) for a batch of challenges.

        ``rng`` supplies the evaluation noise; when the instance is noisy and no
        generator is given a fresh, unseeded one is used.
        """
        delays = self.delay_differences(challenges)
        if self.noise_sigma > 0:
            if rng is None:
                rng = np.random.default_rng()
            delays = delays + rng.normal(0.0, self.noise_sigma, size=delays.shape)
        signs = np.where(delays >= 0, 1, -1).astype(np.int8)
        return np.prod(signs, axis=1, dtype=np.int8)

    def __repr__(self):
        return f"PufInstance({self.label}, stages={self.stages}, noise_sigma={self.noise_sigma}, seed={self.seed})"


def _as_challenges(challenges, stages: int) -> np.ndarray:
    c = np.asarray(challenges)
    if c.ndim == 1:
        c = c[None, :]
    if c.ndim != 2 or c.shape[1] != stages:
        raise ValueError(f"challenge length {c.shape[-1]} does not match {stages} stages")
    if c.size and (c.min() < 0 or c.max() > 1):
        raise ValueError("challenge bits must be 0 or 1")
    return c.astype(np.uint8, copy=False)


def create_instance(arch, stages: int, k: int = 1, noise_sigma: float = 0.0, seed: int = 0) -> PufInstance:
    """Draw a device with i.i.d. standard normal delay weights from ``seed``."""
    arch = check_arch(arch, stages, k)
    rng = np.random.default_rng(int(seed))
    weights = rng.standard_normal((k, stages + 1))
    return PufInstance(arch, int(stages), weights, float(noise_sigma), int(seed))


def evaluate(instance: PufInstance, challenge, rng: Optional[np.random.Generator] = None) -> int:
    """Response of a single challenge."""
    c = np.asarray(challenge)
    if c.ndim != 1:
        raise ValueError("evaluate takes a single challenge; use PufInstance.eval for batches")
    return int(instance.eval(c, rng)[0])


def random_challenges(stages: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=(count, stages), dtype=np.uint8)


@dataclass(eq=False)
class CrpDataset:
    """Ordered challenge/response pairs plus the metadata of their source."""

    stages: int
    arch: Arch
    k: int
    challenges: np.ndarray
    responses: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.arch = Arch.parse(self.arch)
        self.challenges = np.asarray(self.challenges, dtype=np.uint8)
        self.responses = np.asarray(self.responses, dtype=np.int8)
        if self.challenges.ndim != 2 or self.challenges.shape[1] != self.stages:
            raise ValueError("all challenges must have length equal to stages")
        if len(self.challenges) != len(self.responses):
            raise ValueError("challenge and response counts differ")
        if not np.all(np.abs(self.responses) == 1):
            raise ValueError("responses must be -1 or +1")

    def __len__(self):
        return len(self.responses)

    def __eq__(self, other):
        if not isinstance(other, CrpDataset):
            return NotImplemented
        return (
            (self.stages, self.arch, self.k, self.seed) == (other.stages, other.arch, other.k, other.seed)
            and np.array_equal(self.challenges, other.challenges)
            and np.array_equal(self.responses, other.responses)
        )

    def split(self, n_first: int) -> tuple["CrpDataset", "CrpDataset"]:
        a = CrpDataset(self.stages, self.arch, self.k, self.challenges[:n_first], self.responses[:n_first], self.seed)
        b = CrpDataset(self.stages, self.arch, self.k, self.challenges[n_first:], self.responses[n_first:], self.seed)
        return a, b


def generate_crps(instance: PufInstance, count: int, seed: int) -> CrpDataset:
    """Uniformly random challenges (with replacement) and their responses."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    challenge_rng, noise_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(2))
    challenges = random_challenges(instance.stages, count, challenge_rng)
    responses = instance.eval(challenges, noise_rng)
    return CrpDataset(instance.stages, instance.arch, instance.k, challenges, responses, int(seed))


def intra_hd(instance: PufInstance, challenges, repeats: int = 2, seed: Optional[int] = None,
             rngs: Optional[Sequence[np.random.Generator]] = None) -> float:
    """Mean fractional Hamming distance between repeated reads of one device.

    Each repeat gets its own noise stream (derived from ``seed``) unless
    ``rngs`` supplies one generator per repeat.
    """
    c = np.asarray(challenges)
    if c.size == 0:
        raise ValueError("challenge list is empty")
    if repeats < 2:
        raise ValueError("repeats must be >= 2")
    if rngs is None:
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(repeats)]
    elif len(rngs) != repeats:
        raise ValueError("need one generator per repeat")
    reads = np.stack([instance.eval(c, r) for r in rngs])
    dists = [np.mean(reads[i] != reads[j]) for i in range(repeats) for j in range(i + 1, repeats)]
    return float(np.mean(dists))


def inter_hd(instances: Sequence[PufInstance], challenges, seed: Optional[int] = None) -> float:
    """Mean pairwise fractional Hamming distance between distinct devices."""
    if len(instances) < 2:
        raise ValueError("need at least two instances")
    if len({inst.stages for inst in instances}) != 1:
        raise ValueError("instances have mismatched stage counts")
    if len({(inst.arch, inst.k) for inst in instances}) != 1:
        raise ValueError("instances have mismatched architectures")
    c = np.asarray(challenges)
    if c.size == 0:
        raise ValueError("challenge list is empty")
    rng = np.random.default_rng(seed)
    reads = np.stack([inst.eval(c, rng) for inst in instances])
    m = len(instances)
    dists = [np.mean(reads[i] != reads[j]) for i in range(m) for j in range(i + 1, m)]
    return float(np.mean(dists))
