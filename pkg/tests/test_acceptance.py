"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
without ``-s``).
"""
import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_signals
from smeta import io, nn
from smeta.evaluation import METRIC_NAMES, Confusion, metrics, roc_auc
from smeta.experiment import ExperimentConfig, pretrained_bundle, run_experiment
from smeta.inference import side_accuracy, side_finetune, subjects_from_signals
from smeta.meta import MetaConfig, TaskPair, meta_step, sample_episode
from smeta.models import Architecture, Variant, build_bundle, fuse_half_to_half, loss_smeta_ae, loss_smeta_sae
from smeta.signals import AlignmentConfig, align_dataset, block_sizes, downsample
from smeta.synth import SynthConfig, generate_synthetic

SEEDS = range(10)


@pytest.fixture
def verdict(capsys):
    def emit(name, passed, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        assert passed, detail
    return emit


def small_arch(rng):
    return Architecture(int(rng.integers(4, 17)), int(rng.integers(2, 9)),
                        int(rng.integers(2, 5)), int(rng.integers(2, 5)))


# ---------------------------------------------------------------- metric arithmetic


def test_metric_arithmetic(verdict):
    published = (0.732, 0.750, 0.741, 0.744, 0.725, 0.734, 0.738)
    c = Confusion(tp=29, tn=30, fp=10, fn=11)
    start = time.perf_counter()
    m = metrics(c)
    elapsed = time.perf_counter() - start
    errors = {k: abs(m[k] - v) for k, v in zip(METRIC_NAMES, published)}
    ok = all(e <= 0.0005 + 1e-12 for e in errors.values()) and elapsed < 1e-3
    verdict("metric arithmetic", ok,
            f"max |diff| {max(errors.values()):.5f} at 3 decimals, {elapsed * 1e6:.0f} us")


# ---------------------------------------------------------------- down-sampling


def test_downsampling_oracle(verdict):
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    bad = []
    for n_s in range(1, 65):
        x = rng.normal(size=n_s) * 10 ** rng.uniform(-3, 3)
        for n_g in range(1, n_s + 1):
            sizes = block_sizes(n_s, n_g)
            l, m = divmod(n_s, n_g)
            owner = np.repeat(np.arange(n_g), sizes)
            covers = (sizes.sum() == n_s and np.all(sizes >= 1) and np.all(np.diff(owner) >= 0)
                      and list(sizes) == [l + 1] * m + [l] * (n_g - m))
            out = downsample(x, n_g)
            brute = [x[owner == j].mean() for j in range(n_g)]
            mass = abs(np.dot(out, sizes) - x.sum()) <= 1e-9 * max(np.abs(x).sum(), 1e-300)
            if not (covers and mass and np.allclose(out, brute, rtol=1e-12, atol=0)):
                bad.append((n_s, n_g))
    default = block_sizes(400, 131)
    layout_ok = divmod(400, 131) == (3, 7) and list(default) == [4] * 7 + [3] * 124
    elapsed = time.perf_counter() - start
    verdict("down-sampling oracle", not bad and layout_ok and elapsed < 5,
            f"{2080 - len(bad)}/2080 (n_s, n_g) pairs ok, l=3 m=7 {layout_ok}, {elapsed:.2f} s")


# ---------------------------------------------------------------- gradients


def test_gradient_gate(verdict):
    start = time.perf_counter()
    worst_ae = worst_sae = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        arch = small_arch(rng)
        sigs = random_signals(rng, 2, int(rng.integers(2, 5)), dim=arch.input_dim)
        ae = build_bundle(rng, arch, Variant.AE)
        worst_ae = max(worst_ae, nn.fd_check(ae, lambda b: (lambda r: (r[0], r[2]))(loss_smeta_ae(b, sigs)),
                                             step=1e-5))
        sae = build_bundle(rng, arch, Variant.SAE)
        n = len(sigs) // 2
        pairs = fuse_half_to_half(sigs[:n], sigs[n:], rng)
        margin = float(rng.uniform(0.01, 1.0))
        worst_sae = max(worst_sae, nn.fd_check(
            sae, lambda b: (lambda r: (r[0], r[2]))(loss_smeta_sae(b, pairs, margin=margin)), step=1e-5))
    elapsed = time.perf_counter() - start
    verdict("gradient gate", worst_ae < 1e-4 and worst_sae < 1e-4 and elapsed < 60,
            f"20 seeds, worst relative error AE {worst_ae:.2e}, SAE hinge {worst_sae:.2e}, {elapsed:.1f} s")


# ---------------------------------------------------------------- MAML reduction


def _plain_query_step(bundle, episode, beta, cfg):
    """Independent reference: theta - beta * sum of per-task query gradients."""
    total = np.zeros(bundle.size)
    for task in episode.tasks:
        if isinstance(task, TaskPair):
            g = loss_smeta_sae(bundle, task.query_pairs, cfg.margin, cfg.literal_adv, cfg.weights)[2]
        else:
            g = loss_smeta_ae(bundle, task.query, cfg.weights)[2]
        total += g.ravel()
    return bundle.ravel() - beta * total


def test_maml_reduction(verdict):
    start = time.perf_counter()
    worst = 0.0
    for k in range(10):
        rng = np.random.default_rng(1000 + k)
        arch = small_arch(rng)
        variant = Variant.SAE if k % 2 else Variant.AE
        data = random_signals(rng, 8, 12, dim=arch.input_dim)
        cfg = MetaConfig(alpha=0.0, beta=float(rng.uniform(1e-3, 0.5)), variant=variant,
                         inner_steps=int(rng.integers(1, 6)), batch_size=int(rng.integers(1, 5)),
                         query_size=int(rng.integers(1, 9)), shots=int(rng.integers(1, 4)),
                         adaptation="per_task" if k % 3 == 0 else "shared", side_aware=bool(k % 4))
        bundle = build_bundle(rng, arch, variant)
        episode = sample_episode(data, cfg, rng)
        got = meta_step(bundle, episode, cfg)[0].ravel()
        worst = max(worst, float(np.max(np.abs(got - _plain_query_step(bundle, episode, cfg.beta, cfg)))))
    elapsed = time.perf_counter() - start
    verdict("MAML reduction", worst <= 1e-12 and elapsed < 10,
            f"10 configurations, max |diff| {worst:.1e}, {elapsed:.2f} s")


# ---------------------------------------------------------------- episode hygiene


@pytest.fixture(scope="module")
def benchmark_source():
    source, _ = generate_synthetic(SynthConfig(seed=0))
    return align_dataset(source, AlignmentConfig())


def test_episode_hygiene(verdict, benchmark_source):
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    overlaps = repeats = episodes = 0
    for variant in (Variant.AE, Variant.SAE):
        cfg = MetaConfig(variant=variant)
        for _ in range(1000):
            ep = sample_episode(benchmark_source, cfg, rng)
            episodes += 1
            splits = [s for t in ep.tasks for s in ((t.first, t.second) if isinstance(t, TaskPair) else (t,))]
            subjects = [s.subject_id for s in splits]
            repeats += len(subjects) - len(set(subjects))
            for s in splits:
                overlaps += len({id(x) for x in s.support} & {id(x) for x in s.query})
            for t in ep.tasks:
                if isinstance(t, TaskPair):
                    sup = {id(x) for p in t.support_pairs for x in (p.a, p.b)}
                    qry = {id(x) for p in t.query_pairs for x in (p.a, p.b)}
                    overlaps += len(sup & qry)
    elapsed = time.perf_counter() - start
    verdict("episode hygiene", overlaps == 0 and repeats == 0 and elapsed < 10,
            f"{episodes} episodes (1000 AE + 1000 SAE), {overlaps} overlaps, {repeats} subject repeats, "
            f"{elapsed:.2f} s")


# ---------------------------------------------------------------- AUC


def _mann_whitney(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum(Fraction(int(np.sum(p > neg))) + Fraction(int(np.sum(p == neg)), 2) for p in pos)
    return float(wins / (len(pos) * len(neg)))


def test_auc_oracle(verdict):
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst, invariant, instances = 0.0, True, 0
    while instances < 50:
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            continue
        instances += 1
        scores = np.round(rng.uniform(size=n), int(rng.integers(1, 4)))  # coarse rounding plants ties
        points, auc = roc_auc(scores, labels)
        worst = max(worst, abs(auc - _mann_whitney(scores, labels)))
        for f in (lambda s: 3 * s + 1, np.exp, lambda s: s ** 3, lambda s: np.log1p(s)):
            invariant &= roc_auc(f(scores), labels) == (points, auc)
    elapsed = time.perf_counter() - start
    verdict("AUC oracle", worst <= 1e-12 and invariant and elapsed < 5,
            f"50 instances, max |AUC - MW| {worst:.1e}, monotone invariance {invariant}, {elapsed:.2f} s")


# ---------------------------------------------------------------- synthetic benchmark


def _datasets(cfg):
    source, target = generate_synthetic(cfg)
    return (align_dataset(source, AlignmentConfig()),
            align_dataset(target, AlignmentConfig(), apply_window=False))


def _mean_side_accuracy(bundle, target, cfg=None):
    accs = []
    for subject in subjects_from_signals(target):
        theta = bundle if cfg is None else side_finetune(bundle, subject, cfg.beta, cfg.steps, cfg.scope)
        accs.append(side_accuracy(theta, subject.signals))
    return float(np.mean(accs))


@pytest.fixture(scope="module")
def benchmark():
    """Accuracies per seed for the planted-effect and null-effect benchmarks."""
    start = time.perf_counter()
    rows = []
    for seed in SEEDS:
        row = {"seed": seed}
        source, target = _datasets(SynthConfig(seed=seed))
        base = ExperimentConfig(seed=seed)
        pre = pretrained_bundle(source, base)
        row["baseline"] = run_experiment(source, target, ExperimentConfig(seed=seed, method="baseline"), pre).report["acc"]
        smeta = run_experiment(source, target, base, pre)
        row["smeta"] = smeta.report["acc"]
        row["side_before"] = _mean_side_accuracy(smeta.bundle, target)
        row["side_after"] = _mean_side_accuracy(smeta.bundle, target, base.inference_config())

        source, target = _datasets(SynthConfig(seed=seed, class_effect=0.0))
        for model in (Variant.AE, Variant.SAE):
            pre = pretrained_bundle(source, ExperimentConfig(seed=seed, model=model))
            for method in ("baseline", "meta", "smeta"):
                cfg = ExperimentConfig(seed=seed, model=model, method=method)
                row[f"null_{model.value}_{method}"] = run_experiment(source, target, cfg, pre).report["acc"]
        rows.append(row)
    return rows, time.perf_counter() - start


def test_benchmark_side_awareness_helps(verdict, benchmark):
    rows, elapsed = benchmark
    smeta = np.array([r["smeta"] for r in rows])
    base = np.array([r["baseline"] for r in rows])
    wins = int(np.sum(smeta > base))
    ok = smeta.mean() >= base.mean() - 0.01 and wins >= 6 and elapsed < 900
    per_seed = " ".join(f"{s:.3f}/{b:.3f}" for s, b in zip(smeta, base))
    verdict("benchmark (a) SMeta-AE vs AE", ok,
            f"mean {smeta.mean():.4f} vs {base.mean():.4f}, strictly greater in {wins}/10 "
            f"(need 6); per seed smeta/ae {per_seed}; benchmark {elapsed:.0f} s")


def test_benchmark_side_finetune(verdict, benchmark):
    rows, _ = benchmark
    ok_seeds = sum(r["side_after"] >= r["side_before"] for r in rows)
    detail = " ".join(f"{r['side_before']:.3f}->{r['side_after']:.3f}" for r in rows)
    verdict("benchmark (b) side fine-tuning", ok_seeds >= 9, f"after >= before in {ok_seeds}/10 ({detail})")


def test_benchmark_null_effect(verdict, benchmark):
    rows, _ = benchmark
    keys = [k for k in rows[0] if k.startswith("null_")]
    means = {k[5:]: float(np.mean([r[k] for r in rows])) for k in keys}
    verdict("benchmark (c) null-effect control", max(means.values()) <= 0.6,
            ", ".join(f"{k} {v:.3f}" for k, v in means.items()))


# ---------------------------------------------------------------- determinism and checkpoints


def _pipeline(workdir, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    env.pop("SMETA_SEED", None)
    d = str(workdir)
    steps = [
        ["synth", "--out-dir", d, "--seed", "11"],
        ["align", "--input", f"{d}/source.csv", "--output", f"{d}/src.csv"],
        ["align", "--input", f"{d}/target.csv", "--output", f"{d}/tgt.csv", "--no-window"],
        ["pretrain", "--source", f"{d}/src.csv", "--out", f"{d}/pre.json", "--seed", "11"],
        ["metatrain", "--source", f"{d}/src.csv", "--init", f"{d}/pre.json", "--out", f"{d}/meta.json",
         "--trace", f"{d}/trace.csv", "--seed", "11"],
        ["evaluate", "--checkpoint", f"{d}/meta.json", "--target", f"{d}/tgt.csv", "--report",
         f"{d}/report.json", "--predictions", f"{d}/pred.csv"],
    ]
    for argv in steps:
        subprocess.run([sys.executable, "-m", "smeta.cli", *argv], check=True, env=env,
                       stdout=subprocess.DEVNULL)
    return {name: (workdir / name).read_bytes()
            for name in ("report.json", "report.txt", "pred.csv", "trace.csv", "meta.json")}


def test_determinism(verdict, tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = _pipeline(tmp_path / "a", 1)
    b = _pipeline(tmp_path / "b", 2)
    same = [k for k in a if a[k] == b[k]]
    verdict("determinism", len(same) == len(a),
            f"{len(same)}/{len(a)} output files byte-identical across two runs")


def test_checkpoint_round_trip(verdict, tmp_path):
    worst = 0.0
    for k, variant in enumerate([Variant.AE, Variant.SAE] * 3):
        bundle = build_bundle(np.random.default_rng(k), Architecture(), variant)
        bundle = bundle.map(lambda a: a * 10.0 ** np.random.default_rng(k).uniform(-300, 300, a.shape))
        io.save_checkpoint(bundle, tmp_path / f"{k}.json")
        back = io.load_checkpoint(tmp_path / f"{k}.json")
        worst = max(worst, float(np.max(np.abs(back.ravel() - bundle.ravel()))))
        assert back.ravel().tobytes() == bundle.ravel().tobytes()
    verdict("checkpoint round-trip", worst == 0.0, f"6 bundles, max |diff| {worst}")
