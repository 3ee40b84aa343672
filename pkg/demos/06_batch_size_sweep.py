"""Sweep the episode batch size over a few seeds (a shortened run)."""
from dataclasses import replace

from smeta.experiment import ExperimentConfig, run_sweep, summarize_sweep
from smeta.signals import AlignmentConfig, align_dataset
from smeta.synth import SynthConfig, generate_synthetic

source, target = generate_synthetic(SynthConfig(seed=0))
source = align_dataset(source, AlignmentConfig())
target = align_dataset(target, AlignmentConfig(), apply_window=False)

base = replace(ExperimentConfig(), epochs=50, pretrain_epochs=10)
rows = run_sweep("batch_size", [1, 4, 16], base, source, target, seeds=[0, 1])
for row in rows:
    print(row["value"], row["seed"], {k: round(v, 3) for k, v in row.items() if k.startswith("both_")})
for s in summarize_sweep(rows):
    print(f"batch {s['value']:>2}: acc {s['mean']:.3f} +- {s['std']:.3f}, best {s['best']:.3f} (seed {s['best_seed']})")
