"""Subject-as-task episode sampling, pretraining and first-order meta updates.

One meta step on an episode of ``b`` subject tasks is::

    theta_v    = theta   - alpha * sum_k grad L(support_k; theta)     (inner_steps times)
    theta_new  = theta   - beta  * sum_k grad L(query_k;   theta_v)

Task gradients are summed, not averaged. The query gradient is taken at the
virtual parameters and applied to the original ones (first order). By default
one shared virtual parameter set is built from the task-summed support
gradient; ``adaptation="per_task"`` adapts a separate copy per task instead.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InsufficientSignals, InsufficientSubjects
from .models import (
    LossWeights,
    ModelBundle,
    Pair,
    Variant,
    add_grads,
    fuse_half_to_half,
    loss_smeta_ae,
    loss_smeta_sae,
)
from .nn import axpy_params
from .signals import group_by_subject

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetaConfig:
    alpha: float = 1e-3
    beta: float = 1e-3
    shots: int = 2
    query_size: int = 8
    batch_size: int | None = None   # None: 16 for AE, 5 for SAE
    inner_steps: int = 1
    epochs: int | None = None       # None: 200 for AE, 1000 for SAE
    seed: int = 0
    variant: Variant = Variant.AE
    side_aware: bool = True
    inner: bool = True              # False: plain episodic SGD on query sets
    adaptation: str = "shared"      # or "per_task"
    margin: float = 1.0
    literal_adv: bool = False
    weights: LossWeights | None = None  # None: derived from side_aware

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.batch_size is None:
            object.__setattr__(self, "batch_size", 16 if self.variant is Variant.AE else 5)
        if self.epochs is None:
            object.__setattr__(self, "epochs", 200 if self.variant is Variant.AE else 1000)
        if self.weights is None:
            object.__setattr__(self, "weights", LossWeights(ear=1.0 if self.side_aware else 0.0))
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("learning rates must be non-negative")
        for name in ("shots", "query_size", "batch_size", "inner_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.adaptation not in ("shared", "per_task"):
            raise ValueError(f"unknown adaptation mode {self.adaptation!r}")


@dataclass(frozen=True)
class TaskSplit:
    subject_id: str
    support: list
    query: list


@dataclass(frozen=True)
class TaskPair:
    """Two subject tasks fused into pair batches for the Siamese loss."""

    first: TaskSplit
    second: TaskSplit
    support_pairs: list[Pair]
    query_pairs: list[Pair]


@dataclass(frozen=True)
class Episode:
    tasks: list  # list[TaskSplit] for AE, list[TaskPair] for SAE
    variant: Variant = Variant.AE


def _grouped(dataset) -> dict[str, list]:
    if isinstance(dataset, dict):
        return dataset
    return group_by_subject(dataset)


def eligible_subjects(groups: dict[str, list], needed: int) -> list[str]:
    pool, dropped = [], []
    for sid in sorted(groups):
        (pool if len(groups[sid]) >= needed else dropped).append(sid)
    if dropped:
        log.info("excluding %d subject(s) with fewer than %d signals: %s",
                 len(dropped), needed, ", ".join(dropped))
    if not pool and dropped:
        raise InsufficientSignals(dropped[0], len(groups[dropped[0]]), needed)
    return pool


def _split(sid, signals, cfg, rng) -> TaskSplit:
    idx = rng.choice(len(signals), size=cfg.shots + cfg.query_size, replace=False)
    chosen = [signals[i] for i in idx]
    return TaskSplit(sid, chosen[:cfg.shots], chosen[cfg.shots:])


def sample_episode(dataset, cfg: MetaConfig, rng: np.random.Generator) -> Episode:
    """Draw one episode of distinct subjects, each split into support and query.

    ``dataset`` is a list of aligned signals or a ``{subject_id: signals}``
    mapping. SAE episodes draw ``2 * batch_size`` subjects and fuse them pairwise.
    """
    groups = _grouped(dataset)
    pool = eligible_subjects(groups, cfg.shots + cfg.query_size)
    n_subjects = cfg.batch_size * (2 if cfg.variant is Variant.SAE else 1)
    if len(pool) < n_subjects:
        raise InsufficientSubjects(
            f"episode needs {n_subjects} subjects, only {len(pool)} are eligible"
        )
    chosen = [pool[i] for i in rng.choice(len(pool), size=n_subjects, replace=False)]
    splits = [_split(sid, groups[sid], cfg, rng) for sid in chosen]
    if cfg.variant is Variant.AE:
        return Episode(splits, Variant.AE)
    tasks = []
    for first, second in zip(splits[0::2], splits[1::2]):
        tasks.append(TaskPair(
            first, second,
            fuse_half_to_half(first.support, second.support, rng),
            fuse_half_to_half(first.query, second.query, rng),
        ))
    return Episode(tasks, Variant.SAE)


def task_loss(bundle: ModelBundle, task, which: str, cfg: MetaConfig):
    """Loss, components and gradient of one task's ``support`` or ``query`` data."""
    if isinstance(task, TaskPair):
        pairs = task.support_pairs if which == "support" else task.query_pairs
        return loss_smeta_sae(bundle, pairs, cfg.margin, cfg.literal_adv, cfg.weights)
    return loss_smeta_ae(bundle, getattr(task, which), cfg.weights)


@dataclass
class StepStats:
    loss: float = 0.0
    components: dict = field(default_factory=dict)


def summed_gradient(params, tasks: Sequence, which: str, cfg: MetaConfig):
    """Sum of task gradients in task order.

    ``params`` is either one bundle shared by every task or a per-task list.
    Returns ``(gradient, stats)`` with stats averaged over tasks.
    """
    per_task = params if isinstance(params, list) else [params] * len(tasks)
    total = None
    stats = StepStats()
    for theta, task in zip(per_task, tasks):
        loss, comps, grad = task_loss(theta, task, which, cfg)
        total = grad if total is None else add_grads(total, grad)
        stats.loss += loss / len(tasks)
        for k, v in comps.items():
            stats.components[k] = stats.components.get(k, 0.0) + v / len(tasks)
    return total, stats


def _inner(bundle, episode, cfg):
    theta, first = bundle, None
    for _ in range(cfg.inner_steps):
        grad, stats = summed_gradient(theta, episode.tasks, "support", cfg)
        if first is None:
            first = stats
        theta = axpy_params(theta, cfg.alpha, grad)
    return theta, first


def meta_train_inner(bundle: ModelBundle, episode: Episode, cfg: MetaConfig) -> ModelBundle:
    """Virtual parameters from ``inner_steps`` summed support-gradient steps."""
    return _inner(bundle, episode, cfg)[0]


def meta_train_inner_per_task(bundle: ModelBundle, episode: Episode, cfg: MetaConfig) -> list[ModelBundle]:
    """Canonical MAML adaptation: one virtual parameter set per task."""
    adapted = []
    for task in episode.tasks:
        theta = bundle
        for _ in range(cfg.inner_steps):
            _, _, grad = task_loss(theta, task, "support", cfg)
            theta = axpy_params(theta, cfg.alpha, grad)
        adapted.append(theta)
    return adapted


def meta_test_outer(bundle: ModelBundle, virtual, episode: Episode, cfg: MetaConfig) -> ModelBundle:
    """First-order outer update: query gradients at ``virtual`` applied to ``bundle``."""
    grad, _ = summed_gradient(virtual, episode.tasks, "query", cfg)
    return axpy_params(bundle, cfg.beta, grad)


def meta_step(bundle: ModelBundle, episode: Episode, cfg: MetaConfig):
    """One inner + outer update. Returns ``(new_bundle, support_stats, query_stats)``."""
    if not cfg.inner:
        grad, q_stats = summed_gradient(bundle, episode.tasks, "query", cfg)
        return axpy_params(bundle, cfg.beta, grad), StepStats(), q_stats
    if cfg.adaptation == "per_task":
        virtual = meta_train_inner_per_task(bundle, episode, cfg)
        _, s_stats = summed_gradient(bundle, episode.tasks, "support", cfg)
    else:
        virtual, s_stats = _inner(bundle, episode, cfg)
    grad, q_stats = summed_gradient(virtual, episode.tasks, "query", cfg)
    return axpy_params(bundle, cfg.beta, grad), s_stats, q_stats


TRACE_AE_COLUMNS = ["epoch", "mean_support_loss", "mean_query_loss",
                    "component_cls", "component_rec", "component_ear"]
TRACE_SAE_COLUMNS = TRACE_AE_COLUMNS + ["component_adv", "component_sub"]


def meta_fit(bundle: ModelBundle, source, cfg: MetaConfig, rng: np.random.Generator,
             pretrained: bool = True):
    """Run ``cfg.epochs`` episodes of meta-training.

    Returns the trained bundle and a per-epoch trace (list of dicts keyed by
    :data:`TRACE_AE_COLUMNS` / :data:`TRACE_SAE_COLUMNS`).
    """
    if not pretrained:
        warnings.warn("meta-training from random initialization tends to under-fit; "
                      "pretrain first", stacklevel=2)
    groups = _grouped(source)
    keys = ["cls", "rec", "ear"] + (["adv", "sub"] if cfg.variant is Variant.SAE else [])
    trace = []
    for epoch in range(cfg.epochs):
        episode = sample_episode(groups, cfg, rng)
        bundle, s_stats, q_stats = meta_step(bundle, episode, cfg)
        row = {"epoch": epoch + 1,
               "mean_support_loss": s_stats.loss if cfg.inner else math.nan,
               "mean_query_loss": q_stats.loss}
        row.update({f"component_{k}": q_stats.components[k] for k in keys})
        trace.append(row)
    return bundle, trace


def _pretrain_sae_batch(groups, subjects, batch_size, rng):
    a, b = rng.choice(len(subjects), size=2, replace=False)
    sa, sb = groups[subjects[a]], groups[subjects[b]]
    half = max(1, batch_size // 2)
    ta = [sa[i] for i in rng.choice(len(sa), size=min(half, len(sa)), replace=False)]
    tb = [sb[i] for i in rng.choice(len(sb), size=min(half, len(sb)), replace=False)]
    return fuse_half_to_half(ta, tb, rng) + fuse_half_to_half(tb, ta, rng)


def pretrain(bundle: ModelBundle, dataset: Sequence, epochs: int, lr: float, batch_size: int,
             rng: np.random.Generator, weights: LossWeights = LossWeights(),
             margin: float = 1.0, literal_adv: bool = False, trace: list | None = None) -> ModelBundle:
    """Plain mini-batch SGD on the AE (or pairwise SAE) loss, no episodes.

    If ``trace`` is a list, the mean training loss of every epoch is appended.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("cannot pretrain on an empty dataset")
    steps = math.ceil(len(dataset) / batch_size)
    if bundle.variant is Variant.SAE:
        groups = group_by_subject(dataset)
        subjects = sorted(groups)
        if len(subjects) < 2:
            raise InsufficientSubjects("SAE pretraining needs at least two subjects")
    for _ in range(epochs):
        running = 0.0
        if bundle.variant is Variant.AE:
            order = rng.permutation(len(dataset))
            for k in range(steps):
                batch = [dataset[i] for i in order[k * batch_size:(k + 1) * batch_size]]
                loss, _, grad = loss_smeta_ae(bundle, batch, weights)
                bundle = axpy_params(bundle, lr, grad)
                running += loss
        else:
            for _ in range(steps):
                pairs = _pretrain_sae_batch(groups, subjects, batch_size, rng)
                loss, _, grad = loss_smeta_sae(bundle, pairs, margin, literal_adv, weights)
                bundle = axpy_params(bundle, lr, grad)
                running += loss
        if trace is not None:
            trace.append(running / steps)
    return bundle


def with_side_awareness(cfg: MetaConfig, side_aware: bool) -> MetaConfig:
    return replace(cfg, side_aware=side_aware, weights=LossWeights(ear=1.0 if side_aware else 0.0))
