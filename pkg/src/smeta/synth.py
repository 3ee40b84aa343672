"""Synthetic two-dataset benchmark with planted class and side effects.

The waveform is a stylised click-evoked response built from raised-cosine
bumps (waves I, III, V and a trailing trough) on a millisecond time axis.
These are fixed modelling constants for testing, not a model of real ABRs.

Each signal is::

    base(t - onset)
      + class_effect * label * class_template    (waves I, V and slow wave attenuated)
      + side_effect  * (+1 right / -1 left) * side_template   (latency shift)
      + subject_noise * subject-specific smooth curve
      + observation noise

Source subjects contribute one ear each and are sampled densely over a
longer window; target subjects contribute both ears at the target rate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import Label, RawSignal, Side

# (centre ms, half-width ms, amplitude)
WAVES = {
    "I": (1.6, 0.45, 0.6),
    "III": (3.7, 0.5, 0.8),
    "V": (5.6, 0.55, 1.0),
    "trough": (6.7, 0.7, -0.6),
    "slow": (5.0, 3.0, 0.5),
}
ATTENUATED = ("I", "V", "slow")
SIDE_SHIFT_MS = 0.25
SUBJECT_BUMPS = 3
SUBJECT_BUMP_WIDTH_MS = 1.2


@dataclass(frozen=True)
class SynthConfig:
    n_subjects_source: int = 38
    n_subjects_target: int = 40
    source_signals: int = 408
    source_points: int = 500
    target_points: int = 131
    source_duration_ms: float = 10.0
    target_duration_ms: float = 8.0
    source_onset_ms: float = 1.0
    class_effect: float = 0.35
    side_effect: float = 0.5
    subject_noise: float = 0.3
    observation_noise: float = 0.08
    seed: int = 0

    def __post_init__(self):
        for name in ("class_effect", "side_effect", "subject_noise", "observation_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.source_points < 8 or self.target_points < 8:
            raise ValueError("signals need at least 8 points")
        if self.n_subjects_source < 1 or self.n_subjects_target < 1:
            raise ValueError("need at least one subject per dataset")
        n0, n1 = (self.n_subjects_source + 1) // 2, self.n_subjects_source // 2
        if self.source_signals < max(2 * n0 - 1, 2 * n1):
            raise ValueError("too few source signals to give every subject one with classes balanced")


def raised_cosine(t, centre, half_width):
    u = (t - centre) / half_width
    return np.where(np.abs(u) < 1.0, 0.5 * (1.0 + np.cos(np.pi * u)), 0.0)


def base_waveform(t):
    return sum(a * raised_cosine(t, c, w) for c, w, a in WAVES.values())


def class_template(t):
    """Attenuation of waves I and V and of the slow wave under them."""
    return -sum(WAVES[k][2] * raised_cosine(t, WAVES[k][0], WAVES[k][1]) for k in ATTENUATED)


def side_template(t):
    """First-order latency shift of the base waveform."""
    return base_waveform(t - SIDE_SHIFT_MS) - base_waveform(t)


def _subject_curve(rng, duration):
    centres = rng.uniform(0.0, duration, SUBJECT_BUMPS)
    amps = rng.normal(0.0, 1.0, SUBJECT_BUMPS)
    return lambda t: sum(a * raised_cosine(t, c, SUBJECT_BUMP_WIDTH_MS) for a, c in zip(amps, centres))


def _signal(t, label, side, subject_curve, cfg, rng):
    sign = 1.0 if side == Side.RIGHT else -1.0
    x = (base_waveform(t)
         + cfg.class_effect * int(label) * class_template(t)
         + cfg.side_effect * sign * side_template(t)
         + cfg.subject_noise * subject_curve(t))
    return x + rng.normal(0.0, cfg.observation_noise, t.size)


def source_signal_counts(cfg: SynthConfig) -> list[int]:
    """Signals per source subject, balancing the two classes."""
    n = cfg.n_subjects_source
    members = [list(range(c, n, 2)) for c in (0, 1)]
    if not members[1]:
        return [cfg.source_signals]
    totals = [(cfg.source_signals + 1) // 2, cfg.source_signals // 2]
    counts = [0] * n
    for subjects, total in zip(members, totals):
        base, extra = divmod(total, len(subjects))
        for rank, k in enumerate(subjects):
            counts[k] = base + (1 if rank < extra else 0)
    return counts


def generate_synthetic(cfg: SynthConfig = SynthConfig()) -> tuple[list[RawSignal], list[RawSignal]]:
    """Source and target raw datasets for ``cfg``; a pure function of ``cfg``.

    Subjects alternate Control/Tinnitus and source subjects alternate ears in
    pairs. Source signals are split between the classes first (within one
    signal) and then spread evenly over each class's subjects. Target
    subjects carry both ears, so the target is balanced to within one
    subject.
    """
    rng = np.random.default_rng(cfg.seed)
    duration = max(cfg.source_duration_ms, cfg.target_duration_ms)

    t_src = np.arange(cfg.source_points) * (cfg.source_duration_ms / cfg.source_points)
    counts = source_signal_counts(cfg)
    source = []
    for k in range(cfg.n_subjects_source):
        label = Label(k % 2)
        side = Side((k // 2) % 2)
        curve = _subject_curve(rng, duration)
        for _ in range(counts[k]):
            values = _signal(t_src - cfg.source_onset_ms, label, side, curve, cfg, rng)
            source.append(RawSignal(values, f"S{k:03d}", side, label, "source"))

    t_tgt = np.arange(cfg.target_points) * (cfg.target_duration_ms / cfg.target_points)
    target = []
    for k in range(cfg.n_subjects_target):
        label = Label(k % 2)
        curve = _subject_curve(rng, duration)
        for side in (Side.LEFT, Side.RIGHT):
            values = _signal(t_tgt, label, side, curve, cfg, rng)
            target.append(RawSignal(values, f"T{k:03d}", side, label, "target"))
    return source, target
