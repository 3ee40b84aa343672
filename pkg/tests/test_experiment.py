from dataclasses import replace

import numpy as np
import pytest

from conftest import random_signals
from smeta.experiment import (
    METHODS,
    ExperimentConfig,
    pretrained_bundle,
    run_experiment,
    run_sweep,
    summarize_sweep,
)
from smeta.models import Architecture, Variant
from smeta.signals import AlignmentConfig, align_dataset
from smeta.synth import SynthConfig, generate_synthetic

TINY = ExperimentConfig(arch=Architecture(12, 6, 4, 3), pretrain_epochs=2, epochs=3, batch_size=2, query_size=4)


@pytest.fixture(scope="module")
def small_data():
    rng = np.random.default_rng(0)
    return random_signals(rng, 6, 12), random_signals(rng, 4, 2, both_sides=True)


def test_method_mapping():
    assert TINY.meta_config().inner and TINY.meta_config().weights.ear == 1.0
    assert replace(TINY, method="meta").meta_config().weights.ear == 0.0
    assert not replace(TINY, method="plain").meta_config().inner
    assert replace(TINY, method="smeta").inference_config().side_aware
    assert not replace(TINY, method="meta").inference_config().side_aware
    with pytest.raises(ValueError):
        replace(TINY, method="other")


def test_baseline_is_pretrained_model(small_data):
    source, target = small_data
    result = run_experiment(source, target, replace(TINY, method="baseline"))
    assert result.bundle.ravel().tobytes() == pretrained_bundle(source, TINY).ravel().tobytes()
    assert result.trace == []


@pytest.mark.parametrize("method", METHODS)
def test_runs_are_deterministic(small_data, method):
    source, target = small_data
    cfg = replace(TINY, method=method, model=Variant.SAE if method == "plain" else Variant.AE)
    a = run_experiment(source, target, cfg)
    b = run_experiment(source, target, cfg)
    assert a.report.to_json() == b.report.to_json()
    assert a.bundle.ravel().tobytes() == b.bundle.ravel().tobytes()


def test_single_value_sweep_is_one_run(small_data):
    source, target = small_data
    rows = run_sweep("alpha", [0.01], TINY, source, target)
    result = run_experiment(source, target, replace(TINY, alpha=0.01))
    assert len(rows) == 1 and rows[0]["seed"] == TINY.seed
    assert rows[0]["both_acc"] == result.report["acc"]
    assert rows[0]["left_tpr"] == result.report.slices["left"].metrics["tpr"]


def test_sweep_one_row_per_value_and_seed(small_data):
    source, target = small_data
    rows = run_sweep("inner_steps", [1, 2, 3], TINY, source, target, seeds=[4, 5])
    assert [(r["value"], r["seed"]) for r in rows] == [(v, s) for s in (4, 5) for v in (1, 2, 3)]
    summary = summarize_sweep(rows)
    assert [s["value"] for s in summary] == [1, 2, 3]
    first = [r["both_acc"] for r in rows if r["value"] == 1]
    assert summary[0]["mean"] == pytest.approx(np.mean(first))
    assert summary[0]["best"] == max(first) and summary[0]["n"] == 2
    with pytest.raises(ValueError):
        run_sweep("shots", [1], TINY, source, target)
    with pytest.raises(ValueError):
        run_sweep("alpha", [], TINY, source, target)


def test_batch_size_axis_row_labels(small_data):
    source, target = small_data
    rows = run_sweep("batch_size", [1, 2, 4], replace(TINY, epochs=1), source, target)
    assert [r["value"] for r in rows] == [1, 2, 4]
    assert {k for k in rows[0] if k.startswith("both_")} == {
        "both_npv", "both_tnr", "both_ppv", "both_tpr", "both_acc"}


def test_meta_query_loss_decreases_on_benchmark():
    """Side-aware meta-training lowers the query loss in at least 9 of 10 seeds.

    Single episodes are noisy, so the first and last 20 epochs are averaged.
    """
    wins = 0
    for seed in range(10):
        source, target = generate_synthetic(SynthConfig(seed=seed))
        source = align_dataset(source, AlignmentConfig())
        target = align_dataset(target, AlignmentConfig(), apply_window=False)
        trace = run_experiment(source, target, ExperimentConfig(seed=seed)).trace
        q = [row["mean_query_loss"] for row in trace]
        wins += np.mean(q[-20:]) < np.mean(q[:20])
    assert wins >= 9
