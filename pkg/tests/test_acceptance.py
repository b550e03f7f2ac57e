"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the pytest terminal summary,
or directly when this file is run as a script) and then asserts it.
"""

import io
import time

import numpy as np
import pytest

from gradcheck import all_errors
from oracles import all_challenges, delays_from_weights, path_delay_response
from pufguard.attacks import ClonePipeline, brute_force_attack, challenge_keys, classify_architecture, clone
from pufguard.cli import main
from pufguard.discriminator import KINDS, build_discriminator_dataset, train_discriminator
from pufguard.puf import create_instance, inter_hd, intra_hd, random_challenges
from pufguard.seeds import derive_seed

RESULTS: list[str] = []

FAMILIES = [("arbiter", 1), ("xor", 3), ("xor", 4), ("xor", 5), ("xor", 6), ("lw", 3), ("lw", 4), ("lw", 5)]


def record(name: str, passed: bool, detail: str) -> bool:
    RESULTS.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return passed


def _apuf_lr(seed):
    return clone(create_instance("arbiter", 64, seed=seed), "lr", 5000, 2000, seed=1000 + seed)


def test_arbiter_cloning():
    start = time.perf_counter()
    accs = [_apuf_lr(s).test_accuracy for s in range(5)]
    elapsed = time.perf_counter() - start
    mean = float(np.mean(accs))
    ok = mean >= 0.93 and elapsed < 30
    assert record("arbiter cloning (64-stage APUF, LR, 5000/2000, 5 seeds)", ok,
                  f"mean acc {mean:.4f} (>= 0.93), {elapsed:.1f} s (< 30 s)")


def test_xor_cloning_trend():
    start = time.perf_counter()
    accs = {k: clone(create_instance("xor", 64, k, seed=k), "nn", 50000, 2000, seed=1, encoding="parity")
            .test_accuracy for k in (3, 4, 5)}
    elapsed = time.perf_counter() - start
    ok = accs[3] >= 0.85 and accs[3] > accs[4] > accs[5] and elapsed < 600
    assert record("XOR cloning trend (64-stage, NN, 50000 CRPs)", ok,
                  f"3-XOR {accs[3]:.4f} (>= 0.85); 4-XOR {accs[4]:.4f}; 5-XOR {accs[5]:.4f} "
                  f"(strictly decreasing); {elapsed:.0f} s (< 600 s)")


def test_discriminator():
    target = create_instance("arbiter", 64, seed=0)
    res = _apuf_lr(0)
    exclude = challenge_keys(res.train_challenges)
    data = build_discriminator_dataset(target, res.cloner, 64, 1000, seed=7, exclude=exclude)
    accs = {dm.value: train_discriminator(data, dm, seed=3).holdout_accuracy for dm in KINDS}
    best = max(accs.values())
    control_data = build_discriminator_dataset(target, target, 64, 1000, seed=8)
    control = {dm.value: train_discriminator(control_data, dm, seed=3).holdout_accuracy for dm in KINDS}
    err = 1 - res.test_accuracy
    ceiling = 0.5 + 0.5 * (1 - (1 - err) ** 64)
    control_ok = all(0.45 <= a <= 0.55 for a in control.values())
    record("discriminator perfect-clone control", control_ok,
           "held-out acc " + ", ".join(f"{k} {v:.3f}" for k, v in control.items()) + " (within [0.45, 0.55])")
    ok = best >= 0.88
    record("discriminator vs APUF LR clone (w=64, 500/500 batches)", ok,
           "held-out acc " + ", ".join(f"{k} {v:.3f}" for k, v in accs.items())
           + f" (best >= 0.88); clone acc {res.test_accuracy:.4f}, Bayes ceiling {ceiling:.3f}")
    assert control_ok
    assert ok


def _population(family, stages, count, tag):
    arch, k = family
    return [create_instance(arch, stages, k, seed=derive_seed(0, tag, arch, k, i)) for i in range(count)]


def _label(family):
    return create_instance(family[0], 8, family[1]).label


def _classifier(stages, shuffle=False, seed=11):
    train = {_label(f): _population(f, stages, 200, "class-train") for f in FAMILIES}
    ev = {_label(f): _population(f, stages, 100, "class-eval") for f in FAMILIES}
    return classify_architecture(train, 100, "lr", seed=seed, eval_population=ev, shuffle_labels=shuffle)


def test_brute_force_classifier():
    res = _classifier(64)
    shuffled = _classifier(64, shuffle=True)
    ok = res.classification_rate >= 0.50
    ablation_ok = abs(shuffled.classification_rate - 0.125) <= 0.05
    per = ", ".join(f"{k} {v:.2f}" for k, v in res.per_class_rate.items())
    record("8-class architecture classifier (64-stage, 100 probes, 200/class)", ok,
           f"held-out rate {res.classification_rate:.4f} (>= 0.50); per class: {per}")
    record("label-permutation ablation", ablation_ok,
           f"rate {shuffled.classification_rate:.4f} (0.125 +- 0.05)")
    assert ok and ablation_ok


NN16 = {"hidden": 64, "optimizer": "adam", "learning_rate": 0.003, "max_epochs": 100}


def _stage2_pipelines():
    # per-architecture pipelines pick the encoding under which each family is linear per chain
    pipes = {}
    for arch, k in FAMILIES:
        label = _label((arch, k))
        if arch == "arbiter":
            pipes[label] = ClonePipeline("lr", 20000, 2000, None, "parity")
        else:
            pipes[label] = ClonePipeline("nn", 20000, 2000, NN16, "parity" if arch == "xor" else "raw")
    return pipes


def test_direct_beats_brute_force():
    clf = _classifier(16)
    stage2 = _stage2_pipelines()
    direct = ClonePipeline("nn", 20000, 2000, NN16, "combined")
    wins, parts = 0, []
    for arch, k in FAMILIES:
        target = create_instance(arch, 16, k, seed=derive_seed(0, "brute-target", arch, k))
        seed = derive_seed(0, "brute", arch, k)
        score = brute_force_attack(target, clf, stage2, seed)
        d = direct(target, seed).test_accuracy
        wins += d > score.combined
        parts.append(f"{target.label} {d:.3f}/{score.combined:.3f}" + ("*" if score.misrouted else ""))
    ok = wins >= 7
    record("direct clone vs brute force (16-stage, 8 families)", ok,
           f"direct wins {wins}/8 (>= 7); direct/combined: " + ", ".join(parts) + " (* misrouted)")
    assert ok


def test_oracle_equivalence():
    mismatches = 0
    for n in range(2, 9):
        C = all_challenges(n)
        rng = np.random.default_rng(n)
        for i in range(10):
            inst = create_instance("arbiter", n, seed=derive_seed(0, "oracle", n, i))
            p, q, r, s = delays_from_weights(inst.weights[0], rng)
            expected = np.array([path_delay_response(p, q, r, s, c) for c in C])
            mismatches += int(np.sum(inst.eval(C) != expected))
    ok = mismatches == 0
    assert record("oracle equivalence (n = 2..8, 10 instances, all challenges)", ok, f"{mismatches} mismatches (0)")


def test_gradient_suite():
    worst = {}
    for seed in range(5):
        for name, errs in all_errors(seed).items():
            worst[name] = max(worst.get(name, 0.0), max(errs))
    ok = all(v < 1e-4 for v in worst.values())
    assert record("gradient suite (10 points x 5 seeds, step 1e-5)", ok,
                  "max rel err " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (< 1e-4)")


def test_hd_metrics():
    C = random_challenges(64, 1000, np.random.default_rng(0))
    devices = [create_instance("arbiter", 64, seed=derive_seed(0, "hd", i)) for i in range(10)]
    inter = inter_hd(devices, C)
    intra = max(intra_hd(d, C, repeats=3, seed=1) for d in devices)
    ok = abs(inter - 0.5) <= 0.05 and intra == 0.0
    assert record("HD metrics (10 x 64-stage APUF, 1000 challenges)", ok,
                  f"inter {inter:.4f} (0.5 +- 0.05), intra {intra} (0 exactly)")


DET_CONFIG = """
puf.architectures = arbiter:16:1, xor:16:2, lw:16:2
run.repeats = 2
run.train_count = 500
run.test_count = 200
run.batch_width = 16
run.batch_count = 20
run.probe_count = 40
run.instances_per_class = 20
run.eval_instances_per_class = 10
nn.max_epochs = 5
rf.n_estimators = 8
"""


def _cli_outputs(tmp, threads):
    d = tmp / f"t{threads}"
    d.mkdir()
    cfg = tmp / "det.cfg"
    cfg.write_text(DET_CONFIG)
    common = ["--seed", "5", "--threads", str(threads), "--no-timing", "--config", str(cfg)]
    commands = {
        "gen": ["gen", "--arch", "xor", "--k", "2", "--stages", "32", "--count", "300", "--out", str(d / "g.crp")],
        "attack": ["attack", "--crps", str(d / "g.crp"), "--kind", "rf", "--model-out", str(d / "m.txt")],
        "attack-sim": ["attack", "--arch", "lw", "--k", "2", "--stages", "16", "--kind", "nn", "--train", "500"],
        "disc": ["disc", "--arch", "arbiter", "--stages", "16", "--train", "300", "--batch-width", "16",
                 "--batch-count", "20", "--data-out", str(d / "d.disc"), "--model-out", str(d / "dm.txt")],
        "grid": ["grid", "--out-dir", str(d)],
        "brute": ["brute", "--out", str(d / "brute.csv")],
        "report": ["report", str(d / "brute.csv"), str(d / "grid_aggregate.csv"), str(d / "grid_apuf_16.csv")],
    }
    out = {}
    for name, argv in commands.items():
        buf = io.StringIO()
        code = main(common + argv, out=buf)
        out[name] = (code, buf.getvalue().replace(str(d), "<dir>"))
    files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
    return out, files


def test_cli_determinism(tmp_path):
    out1, files1 = _cli_outputs(tmp_path, 1)
    out8, files8 = _cli_outputs(tmp_path, 8)
    codes_ok = all(code == 0 for code, _ in out1.values())
    diff_out = [k for k in out1 if out1[k] != out8[k]]
    diff_files = [k for k in files1 if files1.get(k) != files8.get(k)] + sorted(set(files8) - set(files1))
    ok = codes_ok and not diff_out and not diff_files
    detail = f"{len(out1)} commands, {len(files1)} files byte-identical under --threads 1 vs 8"
    if not ok:
        detail = f"exit codes {[c for c, _ in out1.values()]}; differing stdout {diff_out}; differing files {diff_files}"
    assert record("CLI determinism (--threads 1 vs 8)", ok, detail)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
