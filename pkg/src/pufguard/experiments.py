"""Config-driven experiment runs and their CSV reports.

Every random choice is seeded through :func:`~pufguard.seeds.derive_seed`
from ``run.seed`` plus the job's name, so reports are identical whatever the
thread count.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attacks import ClonePipeline, brute_force_attack, classify_architecture
from .config import ArchSpec, ExperimentConfig
from .discriminator import KINDS, grid_search
from .puf import create_instance
from .seeds import derive_seed

GRID_COLUMNS = ["architecture", "stages", "k", "repeat", "cm", "dm", "config", "cloning_acc_pct",
                "cloning_err_pct", "disc_acc_pct", "disc_err_pct", "cloning_time_s"]
AGGREGATE_COLUMNS = ["architecture", "stages", "k", "repeats", "best_cm", "best_dm", "cloning_err_pct",
                     "disc_err_pct", "cloning_time_s"]
BRUTE_COLUMNS = ["architecture", "stages", "k", "classification_rate_pct", "stage2_cloning_pct", "combined_pct",
                 "direct_clone_pct", "misrouted_pct"]


def pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def seconds(x: float, timing: bool) -> str:
    return f"{x:.3f}" if timing else "NA"


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def arch_file_stem(spec: ArchSpec) -> str:
    return f"{spec.label}_{spec.stages}".lower()


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _target(cfg: ExperimentConfig, spec: ArchSpec, *path):
    seed = derive_seed(cfg.run["seed"], "target", spec.label, spec.stages, *path)
    return create_instance(spec.arch, spec.stages, spec.k, cfg.noise_sigma, seed)


@dataclass
class GridOutput:
    per_arch: dict  # file stem -> csv text
    aggregate: str


def run_grid(cfg: ExperimentConfig, threads: int = 1, timing: bool = True) -> GridOutput:
    """Grid search over (CM, DM) for every architecture and repeat."""
    run = cfg.run
    jobs = [(i, r) for i in range(len(cfg.architectures)) for r in range(run["repeats"])]

    def job(item):
        spec, r = cfg.architectures[item[0]], item[1]
        target = _target(cfg, spec, r)
        return grid_search(target, run["train_count"], run["batch_width"], run["batch_count"],
                           derive_seed(run["seed"], "grid", spec.label, spec.stages, r), run["test_count"],
                           cfg.hypers(), cfg.encodings())

    reports = dict(zip(jobs, _map(job, jobs, threads)))
    per_arch, agg_rows = {}, []
    summary = []
    for i, spec in enumerate(cfg.architectures):
        rows = []
        reps = [reports[(i, r)] for r in range(run["repeats"])]
        for r, rep in enumerate(reps):
            for cell in rep.ordered():
                rows.append([spec.label, spec.stages, spec.k, r, cell.cm.display, cell.dm.display,
                             "single" if cell.single_model else "combined", pct(cell.cloning_accuracy),
                             pct(1 - cell.cloning_accuracy), pct(cell.discriminator_accuracy),
                             pct(1 - cell.discriminator_accuracy), seconds(cell.cloning_seconds, timing)])
        per_arch[arch_file_stem(spec)] = to_csv(GRID_COLUMNS, rows)

        def mean(attr, cm, dm):
            return float(np.mean([getattr(rep.cells[(cm, dm)], attr) for rep in reps]))

        best_cm = max(KINDS, key=lambda cm: mean("cloning_accuracy", cm, cm))
        best_dm = max(KINDS, key=lambda dm: mean("discriminator_accuracy", best_cm, dm))
        clone_err = 1 - mean("cloning_accuracy", best_cm, best_cm)
        disc_err = 1 - mean("discriminator_accuracy", best_cm, best_dm)
        clone_time = mean("cloning_seconds", best_cm, best_cm)
        summary.append((clone_err, disc_err, clone_time))
        agg_rows.append([spec.label, spec.stages, spec.k, run["repeats"], best_cm.display, best_dm.display,
                         pct(clone_err), pct(disc_err), seconds(clone_time, timing)])
    if len(cfg.architectures) > 1:
        means = np.mean(summary, axis=0)
        agg_rows.append(["Average", "", "", run["repeats"], "", "", pct(means[0]), pct(means[1]),
                         seconds(means[2], timing)])
    return GridOutput(per_arch, to_csv(AGGREGATE_COLUMNS, agg_rows))


def run_brute(cfg: ExperimentConfig, threads: int = 1, shuffle_labels: bool | None = None) -> str:
    """Architecture identification plus two-stage cloning, one row per architecture.

    Architectures are grouped by stage count; each group gets its own
    classifier. The direct (architecture-independent) clone of every target
    uses the same seed as the stage-2 clone so the two are comparable.
    """
    run = cfg.run
    shuffle = run["shuffle_labels"] if shuffle_labels is None else shuffle_labels
    kind = run["clone_kind"]
    groups = defaultdict(list)
    for spec in cfg.architectures:
        groups[spec.stages].append(spec)

    rows, class_counts = [], []
    for stages, specs in groups.items():
        if len(specs) < 2:
            raise ValueError(f"brute force needs at least 2 architectures per stage count; {stages} stages has "
                             f"{len(specs)}")
        class_counts.append(len(specs))
        cloners = {s.label: ClonePipeline(kind, run["train_count"], run["test_count"], cfg.hyper(kind, s.label),
                                          cfg.encoding(kind, s.label)) for s in specs}
        direct = ClonePipeline(kind, run["train_count"], run["test_count"], cfg.hyper(kind), cfg.encoding(kind))
        per_spec = defaultdict(list)
        for r in range(run["repeats"]):
            train_pop = {s.label: [_target(cfg, s, "class-train", r, i) for i in range(run["instances_per_class"])]
                         for s in specs}
            eval_pop = {s.label: [_target(cfg, s, "class-eval", r, i)
                                  for i in range(run["eval_instances_per_class"])] for s in specs}
            clf = classify_architecture(
                train_pop, run["probe_count"], run["classifier"], derive_seed(run["seed"], "classifier", stages, r),
                cfg.hyper(run["classifier"]) or None, eval_population=eval_pop, shuffle_labels=shuffle,
                profile_distance=run["profile_distance"], profile_buckets=run["profile_buckets"],
                probe_tail_rate=run["probe_tail_rate"])

            jobs = [(s, t) for s in specs for t in range(run["targets_per_class"])]

            def attack(item, r=r, clf=clf):
                s, t = item
                target = _target(cfg, s, "brute-target", r, t)
                seed = derive_seed(run["seed"], "brute", s.label, stages, r, t)
                return s, brute_force_attack(target, clf, cloners, seed), direct(target, seed)

            for s, score, direct_result in _map(attack, jobs, threads):
                per_spec[s.label].append((score, direct_result.test_accuracy))

        for s in specs:
            results = per_spec[s.label]
            rate = np.mean([sc.classification_rate for sc, _ in results])
            stage2 = np.mean([sc.per_arch_cloning_rate for sc, _ in results])
            combined = np.mean([sc.combined for sc, _ in results])
            direct_acc = np.mean([d for _, d in results])
            misrouted = np.mean([sc.misrouted for sc, _ in results])
            rows.append([s.label, s.stages, s.k, pct(rate), pct(stage2), pct(combined), pct(direct_acc),
                         pct(misrouted)])
    chance = float(np.mean([1.0 / k for k in class_counts]))
    rows.append(["chance", "", "", pct(chance), "", "", "", ""])
    return to_csv(BRUTE_COLUMNS, rows)


def write_grid(output: GridOutput, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, text in output.per_arch.items():
        path = out / f"grid_{stem}.csv"
        path.write_bytes(text.encode())
        paths.append(path)
    path = out / "grid_aggregate.csv"
    path.write_bytes(output.aggregate.encode())
    paths.append(path)
    return paths


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
