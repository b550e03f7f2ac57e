"""``pufguard`` command line.

Data goes to files or stdout, diagnostics to stderr. Exit status is 0 on
success, 1 on a runtime or input error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as pio
from .attacks import ClonedPuf, accuracy, challenge_keys, clone, fit_cloner, fresh_challenges
from .config import ConfigError, ExperimentConfig, load_config
from .discriminator import DiscriminatorDataset, build_discriminator_dataset, train_discriminator
from .experiments import BRUTE_COLUMNS, read_csv, run_brute, run_grid, write_grid
from .learners import LearnerKind
from .puf import Arch, check_arch, create_instance, generate_crps
from .seeds import derive_seed


class UsageError(Exception):
    pass


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _add_target(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--arch", choices=[a.value for a in Arch], required=required)
    p.add_argument("--stages", type=int, default=64)
    p.add_argument("--k", type=int, default=None, help="chains (default 1 for arbiter, 3 otherwise)")
    p.add_argument("--noise", type=float, default=0.0, help="noise sigma per chain delay")


def _target(args, seed: int):
    k = args.k if args.k is not None else (1 if args.arch == Arch.ARBITER.value else 3)
    try:
        check_arch(args.arch, args.stages, k)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return create_instance(args.arch, args.stages, k, args.noise, seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pufguard", description="PUF cloning attacks and clone discrimination.")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides run.seed)")
    parser.add_argument("--threads", type=_positive, default=None, help="worker threads (overrides run.threads)")
    parser.add_argument("--config", type=Path, default=None, help="key=value experiment config")
    parser.add_argument("--no-timing", action="store_true", help="print NA instead of wall times")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a CRP file")
    _add_target(p)
    p.add_argument("--count", type=_positive, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("attack", help="clone a device (or a CRP file) and report accuracy")
    _add_target(p, required=False)
    p.add_argument("--crps", type=Path, help="train on this CRP file instead of a simulated target")
    p.add_argument("--kind", default="lr", choices=[k.value for k in LearnerKind])
    p.add_argument("--encoding", choices=["parity", "raw", "combined"])
    p.add_argument("--train", type=_positive, default=None)
    p.add_argument("--test", type=_positive, default=None)
    p.add_argument("--test-fraction", type=float, default=0.2, help="held-out share of a CRP file")
    p.add_argument("--model-out", type=Path)

    p = sub.add_parser("disc", help="train an authentic-vs-cloned discriminator")
    _add_target(p, required=False)
    p.add_argument("--clone-kind", default="lr", choices=[k.value for k in LearnerKind])
    p.add_argument("--clone-model", type=Path, help="use a saved clone model instead of training one")
    p.add_argument("--kind", default="lr", choices=[k.value for k in LearnerKind])
    p.add_argument("--train", type=_positive, default=None, help="cloner training CRPs")
    p.add_argument("--batch-width", type=_positive, default=None)
    p.add_argument("--batch-count", type=int, default=None, help="batches in total; half are held out")
    p.add_argument("--data", type=Path, help="train on this pufdisc file instead of building one")
    p.add_argument("--data-out", type=Path)
    p.add_argument("--model-out", type=Path)

    p = sub.add_parser("grid", help="3x3 cloning/discriminator grid from a config")
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("brute", help="architecture classification plus two-stage cloning")
    p.add_argument("--out", type=Path, default=None, help="CSV path (stdout if omitted)")
    p.add_argument("--shuffle-labels", action="store_true", help="permute classifier training labels")

    p = sub.add_parser("report", help="print tables from grid/brute CSVs")
    p.add_argument("csv", type=Path, nargs="+")
    return parser


def _config(args, min_architectures: int = 0) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config, min_architectures)
    elif min_architectures:
        raise UsageError("--config is required for this command")
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.run["seed"] = args.seed
    if args.threads is not None:
        cfg.run["threads"] = args.threads
    return cfg


def _feature_dim(encoding: str, stages: int) -> int:
    return {"parity": stages + 1, "raw": stages, "combined": 2 * stages + 1}[encoding]


def _time(seconds: float, args) -> str:
    return "NA" if args.no_timing else f"{seconds:.3f}"


def cmd_gen(args, cfg, out) -> None:
    seed = cfg.run["seed"]
    target = _target(args, seed)
    data = generate_crps(target, args.count, seed)
    pio.write_crps(data, args.out)
    print(f"sha256 {pio.file_checksum(args.out)} {args.out}", file=out)


def cmd_attack(args, cfg, out) -> None:
    seed = cfg.run["seed"]
    kind = LearnerKind.parse(args.kind)
    hyper = cfg.hyper(kind)
    encoding = args.encoding or cfg.encoding(kind)
    if args.crps is not None:
        data = pio.read_crps(args.crps)
        if not 0.0 < args.test_fraction < 1.0:
            raise UsageError("--test-fraction must lie strictly between 0 and 1")
        n_test = max(1, int(round(args.test_fraction * len(data))))
        if len(data) - n_test < 1:
            raise UsageError("CRP file is too small to split into train and test")
        train, test = data.split(len(data) - n_test)
        cloner, elapsed = fit_cloner(train.challenges, train.responses, kind, seed, hyper, encoding)
        acc = float(np.mean(cloner.eval(test.challenges) == test.responses))
    elif args.arch is not None:
        target = _target(args, seed)
        result = clone(target, kind, args.train or cfg.run["train_count"], args.test or cfg.run["test_count"],
                       seed, hyper, encoding)
        cloner, elapsed, acc = result.cloner, result.wall_time_seconds, result.test_accuracy
    else:
        raise UsageError("attack needs --crps or --arch")
    if args.model_out is not None:
        pio.save_model(cloner.learner, args.model_out, cloner.encoding)
    print(f"result kind={kind.value} acc={acc:.6f} err={1 - acc:.6f} time_s={_time(elapsed, args)}", file=out)


def cmd_disc(args, cfg, out) -> None:
    seed = cfg.run["seed"]
    kind = LearnerKind.parse(args.kind)
    width = args.batch_width or cfg.run["batch_width"]
    count = args.batch_count if args.batch_count is not None else cfg.run["batch_count"]
    clone_acc = None
    if args.data is not None:
        vectors, labels = pio.read_disc(args.data)
        data = DiscriminatorDataset(vectors, labels, np.repeat(np.arange((len(labels) + 1) // 2), 2)[:len(labels)])
    else:
        if args.arch is None:
            raise UsageError("disc needs --data or --arch")
        target = _target(args, seed)
        exclude = set()
        if args.clone_model is not None:
            learner, encoding = pio.load_model(args.clone_model)
            cloner = ClonedPuf(learner, encoding or "parity", target.stages)
            if learner.n_features_in_ != _feature_dim(cloner.encoding, target.stages):
                raise UsageError(f"clone model expects {learner.n_features_in_} features, "
                                 f"incompatible with {target.stages}-stage challenges")
            probe = fresh_challenges(target.stages, cfg.run["test_count"],
                                     np.random.default_rng(derive_seed(seed, "clone-check")), set())
            clone_acc = accuracy(cloner, target, probe)
        else:
            ck = LearnerKind.parse(args.clone_kind)
            result = clone(target, ck, args.train or cfg.run["train_count"], cfg.run["test_count"], seed,
                           cfg.hyper(ck), cfg.encoding(ck))
            cloner, clone_acc = result.cloner, result.test_accuracy
            exclude = challenge_keys(result.train_challenges)
        try:
            data = build_discriminator_dataset(target, cloner, width, count, derive_seed(seed, "disc"), exclude)
        except ValueError as e:
            raise UsageError(str(e)) from None
    if args.data_out is not None:
        pio.write_disc(data.vectors, data.labels, args.data_out)
    model = train_discriminator(data, kind, cfg.hyper(kind), derive_seed(seed, "disc-learner"))
    if args.model_out is not None:
        pio.save_model(model.learner, args.model_out)
    acc = model.holdout_accuracy
    parts = [f"result kind={kind.value}", f"width={data.width}", f"acc={acc:.6f}", f"err={1 - acc:.6f}"]
    if clone_acc is not None:
        parts.append(f"clone_acc={clone_acc:.6f}")
    parts.append(f"time_s={_time(model.train_seconds, args)}")
    print(" ".join(parts), file=out)


def cmd_grid(args, cfg, out) -> None:
    output = run_grid(cfg, cfg.run["threads"], timing=not args.no_timing)
    for path in write_grid(output, args.out_dir):
        print(f"wrote {path}", file=sys.stderr)


def cmd_brute(args, cfg, out) -> None:
    text = run_brute(cfg, cfg.run["threads"], shuffle_labels=True if args.shuffle_labels else None)
    if args.out is None:
        out.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_bytes(text.encode())
        print(f"wrote {args.out}", file=sys.stderr)


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)


def cmd_report(args, cfg, out) -> None:
    for path in args.csv:
        rows = read_csv(path)
        if not rows:
            raise UsageError(f"{path}: no data rows")
        cols = list(rows[0])
        if cols == BRUTE_COLUMNS:
            title = "Architecture classification and two-stage cloning (%)"
            head = ["Architecture", "Classification", "Stage-2 clone", "Combined", "Direct clone", "Misrouted"]
            body = [[r["architecture"], r["classification_rate_pct"], r["stage2_cloning_pct"], r["combined_pct"],
                     r["direct_clone_pct"], r["misrouted_pct"]] for r in rows]
        elif "best_cm" in cols:
            title = "Cloning and discriminator error (%), cloning time"
            head = ["Architecture", "Stages", "CM", "DM", "Cloning error", "Disc. error", "Cloning time (s)"]
            body = [[r["architecture"], r["stages"], r["best_cm"], r["best_dm"], r["cloning_err_pct"],
                     r["disc_err_pct"], r["cloning_time_s"]] for r in rows]
        elif "cm" in cols:
            title = f"Grid cells for {rows[0]['architecture']} (accuracy %)"
            head = ["Repeat", "Config", "Cloning", "Discriminator"]
            body = [[r["repeat"], f"{r['cm']}(CM)+{r['dm']}(DM)" if r["config"] == "combined" else f"only {r['cm']}",
                     r["cloning_acc_pct"], r["disc_acc_pct"]] for r in rows]
        else:
            raise UsageError(f"{path}: unrecognised CSV columns")
        print(f"== {title} ==", file=out)
        print(_table([head] + body), file=out)
        print(file=out)


COMMANDS = {"gen": cmd_gen, "attack": cmd_attack, "disc": cmd_disc, "grid": cmd_grid, "brute": cmd_brute,
            "report": cmd_report}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        min_arch = {"grid": 1, "brute": 2}.get(args.command, 0)
        cfg = _config(args, min_arch)
        COMMANDS[args.command](args, cfg, out)
    except UsageError as e:
        print(f"pufguard {args.command}: {e}", file=sys.stderr)
        return 2
    except (ConfigError, OSError, ValueError, KeyError) as e:
        print(f"pufguard {args.command}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
