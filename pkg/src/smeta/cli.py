"""Command-line entry point: ``smeta <subcommand> [options]``.

Subcommands follow the workflow ``synth -> align -> pretrain -> metatrain ->
evaluate`` plus ``sweep`` and ``latent``. Every run is a pure function of its
input files, flags and seed; ``--seed`` falls back to ``$SMETA_SEED`` and
then to 0. Option values may also come from ``--config FILE`` (``key = value``
lines); explicit flags win over the file, the file over built-in defaults.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import SmetaError
from .experiment import SWEEP_AXES, ExperimentConfig, run_sweep, summarize_sweep
from .inference import InferenceConfig, evaluate_subjects, extract_latent
from .meta import TRACE_AE_COLUMNS, TRACE_SAE_COLUMNS, MetaConfig, meta_fit, pretrain
from .models import Architecture, LossWeights, Variant, build_bundle
from .signals import AlignmentConfig, align_dataset
from .synth import SynthConfig, generate_synthetic

log = logging.getLogger("smeta")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SMETA_SEED")
    return int(env) if env else 0


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(stream + 1)[stream])


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    cfg = SynthConfig(
        n_subjects_source=args.n_source_subjects, n_subjects_target=args.n_target_subjects,
        source_signals=args.source_signals, source_points=args.source_points,
        target_points=args.target_points, class_effect=args.class_effect,
        side_effect=args.side_effect, subject_noise=args.subject_noise,
        observation_noise=args.observation_noise, seed=_seed(args),
    )
    source, target = generate_synthetic(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.save_dataset(source, out / "source.csv")
    io.save_dataset(target, out / "target.csv")
    log.info("wrote %d source and %d target signals to %s", len(source), len(target), out)


def cmd_align(args):
    raws = io.load_dataset(args.input)
    cfg = AlignmentConfig(args.window, args.stride, args.target_points)
    aligned = align_dataset(raws, cfg, apply_window=not args.no_window)
    io.save_aligned(aligned, args.output)
    log.info("aligned %d signals into %d rows", len(raws), len(aligned))


def _arch(args, input_dim) -> Architecture:
    return Architecture(input_dim, args.hidden, args.latent, args.subject_hidden)


def cmd_pretrain(args):
    seed = _seed(args)
    source = io.load_aligned(args.source)
    bundle = build_bundle(_rng(seed, 0), _arch(args, len(source[0].values)), Variant(args.model))
    weights = LossWeights(ear=args.ear_weight)
    trace = []
    bundle = pretrain(bundle, source, args.epochs, args.lr, args.batch, _rng(seed, 1), weights,
                      args.margin, args.literal_adv, trace=trace)
    io.save_checkpoint(bundle, args.out, {
        "stage": "pretrain", "seed": seed, "epochs": args.epochs, "lr": args.lr,
        "batch": args.batch, "ear_weight": args.ear_weight,
        "final_loss": trace[-1] if trace else None,
    })


def meta_config_from_args(args, seed) -> MetaConfig:
    ear = args.ear_weight
    if ear is None:
        ear = 0.0 if args.variant == "meta" else 1.0
    return MetaConfig(
        alpha=args.alpha, beta=args.beta, shots=args.shots, query_size=args.query,
        batch_size=args.batch, inner_steps=args.inner_steps, epochs=args.epochs, seed=seed,
        variant=Variant(args.model), side_aware=args.variant == "smeta",
        inner=args.variant != "plain", adaptation=args.adaptation, margin=args.margin,
        literal_adv=args.literal_adv, weights=LossWeights(ear=ear),
    )


def cmd_metatrain(args):
    seed = _seed(args)
    source = io.load_aligned(args.source)
    cfg = meta_config_from_args(args, seed)
    if args.init:
        bundle = io.load_checkpoint(args.init)
        if bundle.variant is not cfg.variant:
            raise SmetaError(f"checkpoint holds a {bundle.variant.value} model, --model is {cfg.variant.value}")
    else:
        bundle = build_bundle(_rng(seed, 0), _arch(args, len(source[0].values)), cfg.variant)
    bundle, trace = meta_fit(bundle, source, cfg, _rng(seed, 2), pretrained=bool(args.init))
    io.save_checkpoint(bundle, args.out, {
        "stage": "metatrain", "seed": seed, "variant": args.variant, "model": args.model,
        "alpha": cfg.alpha, "beta": cfg.beta, "batch": cfg.batch_size, "shots": cfg.shots,
        "query": cfg.query_size, "inner_steps": cfg.inner_steps, "epochs_reached": cfg.epochs,
        "adaptation": cfg.adaptation,
    })
    if args.trace:
        columns = TRACE_SAE_COLUMNS if cfg.variant is Variant.SAE else TRACE_AE_COLUMNS
        io.write_trace(trace, args.trace, columns)


def cmd_evaluate(args):
    bundle = io.load_checkpoint(args.checkpoint)
    target = io.load_aligned(args.target)
    cfg = InferenceConfig(side_aware=args.side_finetune, beta=args.beta,
                          steps=args.finetune_steps, scope=args.finetune_scope)
    predictions, report = evaluate_subjects(bundle, target, cfg)
    text = report.to_text()
    if args.report:
        report_path = Path(args.report)
        report_path.write_text(report.to_json())
        report_path.with_suffix(".txt").write_text(text)
    if args.predictions:
        io.write_predictions(predictions, args.predictions)
    sys.stdout.write(text)


def cmd_sweep(args):
    seed = _seed(args)
    source = io.load_aligned(args.source)
    target = io.load_aligned(args.target)
    caster = int if args.axis in ("batch_size", "inner_steps") else float
    values = [caster(v) for v in args.values.split(",") if v.strip()]
    base = ExperimentConfig(
        model=Variant(args.model), method=args.method, seed=seed,
        arch=Architecture(len(source[0].values), args.hidden, args.latent, args.subject_hidden),
        pretrain_epochs=args.pretrain_epochs, pretrain_lr=args.pretrain_lr,
        pretrain_batch=args.pretrain_batch, alpha=args.alpha, beta=args.beta, shots=args.shots,
        query_size=args.query, batch_size=args.batch, inner_steps=args.inner_steps,
        epochs=args.epochs, finetune_steps=args.finetune_steps,
    )
    seeds = [int(v) for v in args.seeds.split(",")] if args.seeds else None
    rows = run_sweep(args.axis, values, base, source, target, seeds)
    io.write_table(rows, args.out)
    if args.summary:
        io.write_table(summarize_sweep(rows), args.summary)


def cmd_latent(args):
    bundle = io.load_checkpoint(args.checkpoint)
    signals = io.load_aligned(args.input)
    io.write_latents(extract_latent(bundle, signals), args.output, bundle.latent_dim)


# ---------------------------------------------------------------- parser


def _add_arch(p):
    p.add_argument("--hidden", type=int, default=64, help="encoder/decoder hidden width")
    p.add_argument("--latent", type=int, default=32, help="latent width")
    p.add_argument("--subject-hidden", type=int, default=16, help="subject predictor hidden width")


def _add_meta(p, with_batch=True):
    p.add_argument("--model", choices=["ae", "sae"], default="ae")
    p.add_argument("--alpha", type=float, default=1e-3, help="meta-train (inner) rate")
    p.add_argument("--beta", type=float, default=1e-3, help="meta-test (outer) rate")
    if with_batch:
        p.add_argument("--batch", type=int, default=None, help="tasks per episode (16 AE / 5 SAE)")
    p.add_argument("--shots", type=int, default=2)
    p.add_argument("--query", type=int, default=8)
    p.add_argument("--inner-steps", type=int, default=1)
    p.add_argument("--epochs", type=int, default=None, help="episodes (200 AE / 1000 SAE)")


def _add_pair(p):
    p.add_argument("--margin", type=float, default=1.0, help="hinge margin for different-subject pairs")
    p.add_argument("--literal-adv", action="store_true", help="use the unbounded -MSE pair term")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smeta", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="key = value option file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic source/target benchmark")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-source-subjects", type=int, default=38)
    p.add_argument("--n-target-subjects", type=int, default=40)
    p.add_argument("--source-signals", type=int, default=408)
    p.add_argument("--source-points", type=int, default=500)
    p.add_argument("--target-points", type=int, default=131)
    p.add_argument("--class-effect", type=float, default=SynthConfig.class_effect)
    p.add_argument("--side-effect", type=float, default=SynthConfig.side_effect)
    p.add_argument("--subject-noise", type=float, default=SynthConfig.subject_noise)
    p.add_argument("--observation-noise", type=float, default=SynthConfig.observation_noise)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("align", help="slice, down-sample and normalize a signal CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--window", type=int, default=400)
    p.add_argument("--stride", type=int, default=20)
    p.add_argument("--target-points", type=int, default=131)
    p.add_argument("--no-window", action="store_true",
                   help="target-style: normalize only (rows must already have target-points values)")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("pretrain", help="plain SGD training of an AE/SAE")
    p.add_argument("--source", required=True, help="aligned source CSV")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--model", choices=["ae", "sae"], default="ae")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--ear-weight", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    _add_arch(p)
    _add_pair(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("metatrain", help="episodic meta-training")
    p.add_argument("--source", required=True, help="aligned source CSV")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--init", help="pretrained checkpoint (recommended)")
    p.add_argument("--variant", choices=["plain", "meta", "smeta"], default="smeta",
                   help="plain: query-set SGD only; meta: no ear loss; smeta: side-aware")
    _add_meta(p)
    p.add_argument("--adaptation", choices=["shared", "per_task"], default="shared")
    p.add_argument("--ear-weight", type=float, default=None,
                   help="override the ear-loss weight (default 0 for meta, 1 otherwise)")
    p.add_argument("--trace", help="per-epoch trace CSV")
    p.add_argument("--seed", type=int)
    _add_arch(p)
    _add_pair(p)
    p.set_defaults(func=cmd_metatrain)

    p = sub.add_parser("evaluate", help="predict target subjects and write a report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target", required=True, help="aligned target CSV")
    p.add_argument("--side-finetune", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--finetune-steps", type=int, default=1)
    p.add_argument("--finetune-scope", choices=["encoder", "all"], default="encoder")
    p.add_argument("--beta", type=float, default=1e-3, help="fine-tuning rate")
    p.add_argument("--report", help="JSON report path (a .txt table is written next to it)")
    p.add_argument("--predictions", help="prediction CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="one train+evaluate run per hyper-parameter value")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True, help="result table CSV")
    p.add_argument("--method", choices=["baseline", "plain", "meta", "smeta"], default="smeta")
    p.add_argument("--pretrain-epochs", type=int, default=30)
    p.add_argument("--pretrain-lr", type=float, default=0.05)
    p.add_argument("--pretrain-batch", type=int, default=32)
    p.add_argument("--finetune-steps", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seeds; overrides --seed")
    p.add_argument("--summary", help="per-value mean/std/best accuracy CSV")
    _add_meta(p)
    _add_arch(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("latent", help="export encoder outputs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="aligned signal CSV")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_latent)
    return parser


def _apply_config(parser, argv):
    """Re-parse with option defaults taken from ``--config``."""
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    found, rest = pre.parse_known_args(argv)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((a for a in rest if a in subparsers.choices), None)
    if not found.config or command is None:
        return parser.parse_args(argv)
    values = io.read_config(found.config)
    sp = subparsers.choices[command]
    known = {a.dest: a for a in sp._actions}
    unknown = sorted(set(values) - set(known))
    if unknown:
        sp.error(f"unknown config key(s): {', '.join(unknown)}")
    defaults = {}
    for key, text in values.items():
        action = known[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse.BooleanOptionalAction)):
            defaults[key] = text.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = action.type(text) if action.type else text
        # flags given in the file satisfy required=True
        action.required = False
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (SmetaError, OSError, ValueError, KeyError) as exc:
        print(f"smeta {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


cli = main

if __name__ == "__main__":
    sys.exit(main())
