"""Align a long source recording with a short target recording.

Source signals are cut into 400-point windows every 20 points, each window
is block-averaged down to 131 points and min-max normalized. Target signals
already have 131 points and are only normalized.
"""
import numpy as np

from smeta.signals import AlignmentConfig, align_dataset, block_sizes
from smeta.synth import SynthConfig, generate_synthetic

cfg = AlignmentConfig(window_size=400, stride=20, target_points=131)
source, target = generate_synthetic(SynthConfig(seed=0))
print(f"raw source: {len(source)} signals of {source[0].sample_count} points")
print(f"raw target: {len(target)} signals of {target[0].sample_count} points")

# block layout of one window: the first m blocks get one extra sample
sizes = block_sizes(cfg.window_size, cfg.target_points)
l, m = divmod(cfg.window_size, cfg.target_points)
print(f"l={l} m={m}: {np.sum(sizes == l + 1)} blocks of {l + 1}, {np.sum(sizes == l)} blocks of {l}")

aligned_source = align_dataset(source, cfg)
aligned_target = align_dataset(target, cfg, apply_window=False)
print(f"aligned source: {len(aligned_source)} windows, offsets of the first signal:",
      [s.parent_offset for s in aligned_source[:6]])
print(f"aligned target: {len(aligned_target)} signals")

# both datasets now live on the same grid and range
for name, data in (("source", aligned_source), ("target", aligned_target)):
    x = np.stack([s.values for s in data])
    print(f"{name:6s} shape {x.shape}, range [{x.min():.1f}, {x.max():.1f}], mean {x.mean():.3f}")
