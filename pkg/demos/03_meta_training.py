"""Pretrain an autoencoder, then meta-train it with subject-as-task episodes."""
import numpy as np

from smeta.meta import MetaConfig, meta_fit, pretrain, sample_episode
from smeta.models import LossWeights, build_bundle
from smeta.signals import AlignmentConfig, align_dataset
from smeta.synth import SynthConfig, generate_synthetic

source, _ = generate_synthetic(SynthConfig(seed=1))
source = align_dataset(source, AlignmentConfig())
seeds = np.random.SeedSequence(1).spawn(3)
init_rng, pre_rng, meta_rng = (np.random.default_rng(s) for s in seeds)

bundle = build_bundle(init_rng)
trace = []
bundle = pretrain(bundle, source, epochs=30, lr=0.05, batch_size=32, rng=pre_rng,
                  weights=LossWeights(ear=0.0), trace=trace)
print("pretraining loss, every 5th epoch:", np.round(trace[::5], 4))

cfg = MetaConfig()  # alpha = beta = 1e-3, 2 shots, 8 queries, 16 tasks, 200 episodes
episode = sample_episode(source, cfg, np.random.default_rng(0))
task = episode.tasks[0]
print(f"one episode: {len(episode.tasks)} subjects; {task.subject_id} has "
      f"{len(task.support)} support and {len(task.query)} query windows")

bundle, trace = meta_fit(bundle, source, cfg, meta_rng)
q = np.array([row["mean_query_loss"] for row in trace])
print(f"query loss: first 20 episodes {q[:20].mean():.4f}, last 20 {q[-20:].mean():.4f}")
print("last row:", {k: round(v, 4) for k, v in trace[-1].items()})
