"""Flat ``key = value`` experiment configuration.

Keys carry a section prefix: ``puf.`` (devices), ``run.`` (counts, seeds,
repeats), and ``lr.`` / ``nn.`` / ``rf.`` (learner hyperparameters plus an
``encoding`` key). A learner section may be narrowed to one architecture
with ``@``, e.g. ``nn@3-XOR.hidden = 64``; such values override the generic
ones for that architecture's cloning pipeline. Blank lines and ``#``
comments are ignored.

Example::

    puf.architectures = arbiter:64:1, xor:64:3, lw:64:3
    run.seed = 7
    run.repeats = 5
    nn.optimizer = adam
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .learners import LearnerKind, make_learner
from .puf import Arch, arch_label, check_arch


class ConfigError(ValueError):
    """All validation problems of a config, reported together."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


RUN_DEFAULTS = {
    "seed": 0,
    "repeats": 5,
    "train_count": 5000,
    "test_count": 2000,
    "batch_width": 64,
    "batch_count": 1000,
    "probe_count": 100,
    "instances_per_class": 200,
    "eval_instances_per_class": 100,
    "classifier": "lr",
    "clone_kind": "nn",
    "targets_per_class": 1,
    "shuffle_labels": False,
    "profile_distance": 2,
    "profile_buckets": 8,
    "probe_tail_rate": 0.2,
    "threads": 1,
}

COUNT_KEYS = ("repeats", "train_count", "test_count", "batch_width", "batch_count", "probe_count",
              "instances_per_class", "eval_instances_per_class", "targets_per_class", "threads")


def parse_value(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


@dataclass(frozen=True)
class ArchSpec:
    arch: Arch
    stages: int
    k: int

    @property
    def label(self) -> str:
        return arch_label(self.arch, self.k)


@dataclass
class ExperimentConfig:
    architectures: list[ArchSpec] = field(default_factory=list)
    noise_sigma: float = 0.0
    run: dict = field(default_factory=lambda: dict(RUN_DEFAULTS))
    learners: dict = field(default_factory=dict)  # kind -> {param: value}
    overrides: dict = field(default_factory=dict)  # (kind, label) -> {param: value}

    def hyper(self, kind, label: Optional[str] = None) -> dict:
        kind = LearnerKind.parse(kind)
        params = {k: v for k, v in self.learners.get(kind, {}).items() if k != "encoding"}
        if label is not None:
            params.update({k: v for k, v in self.overrides.get((kind, label), {}).items() if k != "encoding"})
        return params

    def encoding(self, kind, label: Optional[str] = None) -> Optional[str]:
        kind = LearnerKind.parse(kind)
        if label is not None and "encoding" in self.overrides.get((kind, label), {}):
            return self.overrides[(kind, label)]["encoding"]
        return self.learners.get(kind, {}).get("encoding")

    def hypers(self) -> dict:
        return {kind: self.hyper(kind) for kind in LearnerKind}

    def encodings(self) -> dict:
        return {kind: enc for kind in LearnerKind if (enc := self.encoding(kind))}


def _parse_arch(token: str, problems: list[str]) -> Optional[ArchSpec]:
    parts = token.strip().split(":")
    if len(parts) not in (2, 3):
        problems.append(f"architecture {token!r} must look like arch:stages[:k]")
        return None
    try:
        arch = Arch.parse(parts[0])
        stages = int(parts[1])
        k = int(parts[2]) if len(parts) == 3 else 1
        check_arch(arch, stages, k)
    except ValueError as e:
        problems.append(f"architecture {token!r}: {e}")
        return None
    return ArchSpec(arch, stages, k)


def parse_config(text: str, min_architectures: int = 1) -> ExperimentConfig:
    cfg = ExperimentConfig()
    problems: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or "." not in key:
            problems.append(f"line {lineno}: expected '<section>.<key> = <value>'")
            continue
        section, name = key.split(".", 1)
        if section == "puf":
            if name == "architectures":
                cfg.architectures = [a for tok in value.split(",") if tok.strip()
                                     if (a := _parse_arch(tok, problems)) is not None]
            elif name == "noise_sigma":
                v = parse_value(value)
                if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
                    problems.append(f"line {lineno}: puf.noise_sigma must be a non-negative number")
                else:
                    cfg.noise_sigma = float(v)
            else:
                problems.append(f"line {lineno}: unknown key {key!r}")
        elif section == "run":
            if name not in RUN_DEFAULTS:
                problems.append(f"line {lineno}: unknown key {key!r}")
                continue
            cfg.run[name] = parse_value(value)
        else:
            kind_text, _, label = section.partition("@")
            try:
                kind = LearnerKind.parse(kind_text)
            except ValueError:
                problems.append(f"line {lineno}: unknown section {section!r}")
                continue
            target = cfg.overrides.setdefault((kind, label), {}) if label else cfg.learners.setdefault(kind, {})
            target[name] = parse_value(value)

    if len(cfg.architectures) < min_architectures:
        problems.append(f"puf.architectures must list at least {min_architectures} architecture(s)")
    for name in COUNT_KEYS:
        v = cfg.run[name]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            problems.append(f"run.{name} must be an integer >= 1, got {v!r}")
    if not isinstance(cfg.run["seed"], int) or cfg.run["seed"] < 0:
        problems.append("run.seed must be a non-negative integer")
    for name in ("classifier", "clone_kind"):
        try:
            cfg.run[name] = LearnerKind.parse(cfg.run[name])
        except ValueError as e:
            problems.append(f"run.{name}: {e}")
    for kind in LearnerKind:
        for label, params in [(None, cfg.learners.get(kind, {}))] + [
                (lbl, p) for (k, lbl), p in cfg.overrides.items() if k is kind]:
            where = kind.value + (f"@{label}" if label else "")
            enc = params.get("encoding")
            if enc is not None and enc not in ("parity", "raw", "combined"):
                problems.append(f"{where}.encoding must be parity, raw or combined")
            try:
                make_learner(kind, {k: v for k, v in params.items() if k != "encoding"})
            except TypeError as e:
                problems.append(f"{where}: {e}")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, min_architectures: int = 1) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), min_architectures)
