"""End-to-end training and evaluation workflow, and hyper-parameter sweeps.

Methods:

``baseline``
    pretrained AE/SAE only, no meta-learning, no fine-tuning.
``plain``
    pretrain, then episodic SGD on query sets (no inner step).
``meta``
    pretrain, then meta-learning without the ear-side loss.
``smeta``
    pretrain, then side-aware meta-learning and per-subject side
    fine-tuning at inference.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .evaluation import METRIC_NAMES, SLICES, EvalReport
from .inference import InferenceConfig, evaluate_subjects
from .meta import MetaConfig, meta_fit, pretrain
from .models import Architecture, LossWeights, ModelBundle, Variant, build_bundle

METHODS = ("baseline", "plain", "meta", "smeta")
SWEEP_AXES = ("batch_size", "inner_steps", "alpha", "beta")


@dataclass(frozen=True)
class ExperimentConfig:
    model: Variant = Variant.AE
    method: str = "smeta"
    seed: int = 0
    arch: Architecture = Architecture()
    pretrain_epochs: int = 30
    pretrain_lr: float = 0.05
    pretrain_batch: int = 32
    alpha: float = 1e-3
    beta: float = 1e-3
    shots: int = 2
    query_size: int = 8
    batch_size: int | None = None
    inner_steps: int = 1
    epochs: int | None = None
    finetune_steps: int = 1
    finetune_scope: str = "encoder"
    margin: float = 1.0
    literal_adv: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", Variant(self.model))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    @property
    def side_aware(self) -> bool:
        return self.method == "smeta"

    def meta_config(self) -> MetaConfig:
        ear = 0.0 if self.method == "meta" else 1.0
        return MetaConfig(
            alpha=self.alpha, beta=self.beta, shots=self.shots, query_size=self.query_size,
            batch_size=self.batch_size, inner_steps=self.inner_steps, epochs=self.epochs,
            seed=self.seed, variant=self.model, side_aware=self.side_aware,
            inner=self.method != "plain", margin=self.margin, literal_adv=self.literal_adv,
            weights=LossWeights(ear=ear),
        )

    def inference_config(self) -> InferenceConfig:
        return InferenceConfig(side_aware=self.side_aware, beta=self.beta,
                               steps=self.finetune_steps, scope=self.finetune_scope)


PRETRAIN_WEIGHTS = LossWeights(ear=0.0)


def rngs(seed: int):
    """Independent generators for initialization, pretraining and meta-training."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def pretrained_bundle(source, cfg: ExperimentConfig) -> ModelBundle:
    init_rng, pre_rng, _ = rngs(cfg.seed)
    arch = replace(cfg.arch, input_dim=len(source[0].values))
    bundle = build_bundle(init_rng, arch, cfg.model)
    return pretrain(bundle, source, cfg.pretrain_epochs, cfg.pretrain_lr, cfg.pretrain_batch,
                    pre_rng, PRETRAIN_WEIGHTS, cfg.margin, cfg.literal_adv)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    bundle: ModelBundle
    trace: list = field(default_factory=list)
    predictions: list = field(default_factory=list)
    report: EvalReport | None = None


def train(source, cfg: ExperimentConfig, pretrained: ModelBundle | None = None):
    """Pretrain (unless ``pretrained`` is given) and run the method's second stage."""
    bundle = pretrained if pretrained is not None else pretrained_bundle(source, cfg)
    if cfg.method == "baseline":
        return bundle, []
    _, _, meta_rng = rngs(cfg.seed)
    return meta_fit(bundle, source, cfg.meta_config(), meta_rng)


def run_experiment(source, target, cfg: ExperimentConfig,
                   pretrained: ModelBundle | None = None) -> ExperimentResult:
    bundle, trace = train(source, cfg, pretrained)
    predictions, report = evaluate_subjects(bundle, target, cfg.inference_config())
    return ExperimentResult(cfg, bundle, trace, predictions, report)


def report_row(report: EvalReport, metric_names=METRIC_NAMES) -> dict:
    row = {}
    for sl in SLICES:
        for m in metric_names:
            row[f"{sl}_{m}"] = report.slices[sl].metrics[m]
    return row


SWEEP_METRICS = ("npv", "tnr", "ppv", "tpr", "acc")


def run_sweep(axis: str, values, base: ExperimentConfig, source, target, seeds=None) -> list[dict]:
    """Train and evaluate once per (value, seed); one row per run.

    ``seeds`` defaults to ``[base.seed]``. Runs sharing a seed share the
    pretrained model, and every row records its seed for exact replay.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    seeds = [base.seed] if seeds is None else list(seeds)
    rows = []
    for seed in seeds:
        seeded = replace(base, seed=seed)
        pretrained = pretrained_bundle(source, seeded)
        for value in values:
            cfg = replace(seeded, **{axis: value})
            result = run_experiment(source, target, cfg, pretrained)
            row = {"axis": axis, "value": value, "seed": seed, "method": cfg.method,
                   "model": cfg.model.value}
            row.update(report_row(result.report, SWEEP_METRICS))
            rows.append(row)
    return rows


def summarize_sweep(rows: list[dict], metric: str = "both_acc") -> list[dict]:
    """Per-value mean, standard deviation and best run of ``metric`` over seeds.

    Undefined metric values are left out of the statistics; ``n`` counts
    the runs that contributed.
    """
    out = []
    for value in dict.fromkeys(r["value"] for r in rows):
        runs = [r for r in rows if r["value"] == value and r[metric] is not None]
        vals = np.array([r[metric] for r in runs], dtype=float)
        best = runs[int(np.argmax(vals))] if runs else None
        out.append({"value": value, "metric": metric, "n": len(runs),
                    "mean": float(vals.mean()) if runs else None,
                    "std": float(vals.std()) if runs else None,
                    "best": float(vals.max()) if runs else None,
                    "best_seed": best["seed"] if best else None})
    return out


def config_echo(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["model"] = cfg.model.value
    return d
