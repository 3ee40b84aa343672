"""Encoder/decoder/heads bundle and the composite autoencoder losses.

The AE loss is classification + reconstruction + ear-side prediction on a
batch of signals. The Siamese (SAE) loss adds two pairwise terms on latent
codes: a distance term pulling same-subject pairs together and pushing
different-subject pairs apart, and a same-subject classifier on the
concatenated pair of codes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import nn
from .errors import EmptyBatch, EmptyTask, ShapeMismatch, VariantMismatch
from .nn import Activation, LayerSpec, ParameterSet

PARTS = ("encoder", "decoder", "classifier", "side_predictor", "subject_predictor")


class Variant(str, enum.Enum):
    AE = "ae"
    SAE = "sae"


@dataclass(frozen=True)
class Architecture:
    input_dim: int = 131
    hidden_dim: int = 64
    latent_dim: int = 32
    subject_hidden_dim: int = 16

    def specs(self) -> dict[str, list[LayerSpec]]:
        n, h, z, s = self.input_dim, self.hidden_dim, self.latent_dim, self.subject_hidden_dim
        return {
            "encoder": [LayerSpec(n, h, Activation.TANH), LayerSpec(h, z, Activation.IDENTITY)],
            "decoder": [LayerSpec(z, h, Activation.TANH), LayerSpec(h, n, Activation.SIGMOID)],
            "classifier": [LayerSpec(z, 2)],
            "side_predictor": [LayerSpec(z, 2)],
            "subject_predictor": [LayerSpec(2 * z, s, Activation.RELU), LayerSpec(s, 2)],
        }


@dataclass(frozen=True, eq=False)
class ModelBundle:
    encoder: ParameterSet
    decoder: ParameterSet
    classifier: ParameterSet
    side_predictor: ParameterSet
    subject_predictor: ParameterSet
    variant: Variant = Variant.AE

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        z = self.encoder.output_dim
        if not (self.decoder.input_dim == self.classifier.input_dim
                == self.side_predictor.input_dim == z):
            raise ShapeMismatch("decoder and heads must all take the encoder's latent width")
        if self.subject_predictor.input_dim != 2 * z:
            raise ShapeMismatch("subject predictor must take two concatenated latents")
        if self.decoder.output_dim != self.encoder.input_dim:
            raise ShapeMismatch("decoder must reproduce the encoder input width")

    @property
    def input_dim(self) -> int:
        return self.encoder.input_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder.output_dim

    def parts(self) -> list[ParameterSet]:
        return [getattr(self, p) for p in PARTS]

    @property
    def size(self) -> int:
        return sum(p.size for p in self.parts())

    def ravel(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parts()])

    def with_vector(self, vec) -> "ModelBundle":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ShapeMismatch(f"vector of {vec.size} entries for {self.size} parameters")
        new, pos = {}, 0
        for name in PARTS:
            part = getattr(self, name)
            new[name] = part.with_vector(vec[pos:pos + part.size])
            pos += part.size
        return replace(self, **new)

    def map(self, fn) -> "ModelBundle":
        return replace(self, **{p: getattr(self, p).map(fn) for p in PARTS})

    def zeros_like(self) -> "ModelBundle":
        return self.map(np.zeros_like)

    def combine(self, other: "ModelBundle", fn) -> "ModelBundle":
        return replace(self, **{p: getattr(self, p).combine(getattr(other, p), fn) for p in PARTS})

    def same_shape(self, other: "ModelBundle") -> bool:
        return all(getattr(self, p).same_shape(getattr(other, p)) for p in PARTS)


def build_bundle(rng: np.random.Generator, arch: Architecture = Architecture(),
                 variant: Variant = Variant.AE) -> ModelBundle:
    specs = arch.specs()
    return ModelBundle(
        **{name: nn.init_params(specs[name], rng, prefix=f"{name}.") for name in PARTS},
        variant=variant,
    )


def add_grads(a: ModelBundle, b: ModelBundle) -> ModelBundle:
    return a.combine(b, np.add)


@dataclass(frozen=True)
class LossWeights:
    cls: float = 1.0
    rec: float = 1.0
    ear: float = 1.0
    adv: float = 1.0
    sub: float = 1.0


# ---------------------------------------------------------------- batches


def _stack(signals, input_dim: int):
    if len(signals) == 0:
        raise EmptyBatch("batch has no signals")
    x = np.stack([np.asarray(s.values, dtype=np.float64) for s in signals])
    if x.shape[1] != input_dim:
        raise ShapeMismatch(f"signals have {x.shape[1]} points, encoder takes {input_dim}")
    y = np.array([int(s.class_label) for s in signals])
    side = np.array([int(s.side) for s in signals])
    return x, y, side


def _ae_terms(bundle: ModelBundle, x, y, side, weights: LossWeights):
    """AE loss terms plus per-part gradients and the gradient at the latent codes.

    Returns ``(components, grads, z, dz, enc_tape)`` where ``grads`` maps each
    head name to its GradientSet and ``dz`` is d(weighted total)/d(latent).
    """
    z, enc_tape = nn.forward(bundle.encoder, x)
    dz = np.zeros_like(z)
    grads = {}
    comps = {}

    logits, tape = nn.forward(bundle.classifier, z)
    comps["cls"], g = nn.cross_entropy_batch(logits, y)
    grads["classifier"], back = nn.backward(tape, weights.cls * g)
    dz += back

    recon, tape = nn.forward(bundle.decoder, z)
    comps["rec"], g = nn.mse_batch(recon, x)
    grads["decoder"], back = nn.backward(tape, weights.rec * g)
    dz += back

    logits, tape = nn.forward(bundle.side_predictor, z)
    comps["ear"], g = nn.cross_entropy_batch(logits, side)
    if weights.ear != 0.0:
        grads["side_predictor"], back = nn.backward(tape, weights.ear * g)
        dz += back
    else:
        grads["side_predictor"] = bundle.side_predictor.zeros_like()

    return comps, grads, z, dz, enc_tape


def _total(comps: dict, weights: LossWeights) -> float:
    return sum(getattr(weights, k) * v for k, v in comps.items())


def loss_smeta_ae(bundle: ModelBundle, batch: Sequence, weights: LossWeights = LossWeights()):
    """Weighted cls + rec + ear loss over ``batch`` and its exact gradient.

    Each component is a mean over the batch, so magnitudes do not depend on
    batch size.

    Returns
    -------
    total : float
    components : dict with keys ``cls``, ``rec``, ``ear``
    grad : ModelBundle
        Gradient of ``total``; the subject predictor's entry is all zeros.
    """
    x, y, side = _stack(batch, bundle.input_dim)
    comps, grads, _, dz, enc_tape = _ae_terms(bundle, x, y, side, weights)
    grads["encoder"], _ = nn.backward(enc_tape, dz)
    grads["subject_predictor"] = bundle.subject_predictor.zeros_like()
    return _total(comps, weights), comps, replace(bundle, **grads)


# ---------------------------------------------------------------- pairs


@dataclass(frozen=True)
class Pair:
    a: object
    b: object
    same_subject: bool

    def __post_init__(self):
        if self.same_subject != (self.a.subject_id == self.b.subject_id):
            raise ValueError("same_subject flag contradicts the subject ids")


PairBatch = list  # list[Pair]


def make_pair(a, b) -> Pair:
    return Pair(a, b, a.subject_id == b.subject_id)


def fuse_half_to_half(task_a: Sequence, task_b: Sequence, rng: np.random.Generator) -> list[Pair]:
    """Build ``min(|a|, |b|)`` pairs from two single-subject sets.

    The first ``ceil(n/2)`` pairs stay within one subject (alternating between
    ``task_a`` and ``task_b``); the remaining ``floor(n/2)`` pair one element
    of each. A same-subject pair drawn from a one-element set pairs the signal
    with itself. Pair order is shuffled.
    """
    if len(task_a) == 0 or len(task_b) == 0:
        raise EmptyTask("both tasks need at least one signal")
    n = min(len(task_a), len(task_b))
    n_same, n_cross = math.ceil(n / 2), n // 2
    pairs = []
    for k in range(n_same):
        task = task_a if k % 2 == 0 else task_b
        if len(task) >= 2:
            i, j = rng.choice(len(task), size=2, replace=False)
        else:
            i = j = 0
        pairs.append(make_pair(task[i], task[j]))
    ia = rng.permutation(len(task_a))[:n_cross]
    ib = rng.permutation(len(task_b))[:n_cross]
    pairs.extend(make_pair(task_a[i], task_b[j]) for i, j in zip(ia, ib))
    order = rng.permutation(len(pairs))
    return [pairs[k] for k in order]


def loss_smeta_sae(bundle: ModelBundle, pairs: Sequence[Pair], margin: float = 1.0,
                   literal_adv: bool = False, weights: LossWeights = LossWeights()):
    """AE terms over every distinct signal in ``pairs`` plus the pairwise terms.

    The distance term is ``+MSE(e_i, e_j)`` for same-subject pairs. For
    different-subject pairs it is ``max(0, margin - MSE)`` by default, or the
    unbounded ``-MSE`` when ``literal_adv`` is set.
    """
    if bundle.variant is not Variant.SAE:
        raise VariantMismatch("pairwise loss needs an SAE bundle")
    if len(pairs) == 0:
        raise EmptyBatch("no pairs")

    index: dict[int, int] = {}
    signals = []
    for p in pairs:
        for s in (p.a, p.b):
            if id(s) not in index:
                index[id(s)] = len(signals)
                signals.append(s)
    x, y, side = _stack(signals, bundle.input_dim)
    comps, grads, z, dz, enc_tape = _ae_terms(bundle, x, y, side, weights)

    ia = np.array([index[id(p.a)] for p in pairs])
    ib = np.array([index[id(p.b)] for p in pairs])
    same = np.array([p.same_subject for p in pairs])
    n_pairs = len(pairs)

    diff = z[ia] - z[ib]
    dist = np.mean(diff ** 2, axis=1)
    ddist = 2.0 * diff / diff.shape[1]  # d dist / d z_a
    if literal_adv:
        sign = np.where(same, 1.0, -1.0)
        terms = sign * dist
    else:
        active = ~same & (dist < margin)
        sign = np.where(same, 1.0, np.where(active, -1.0, 0.0))
        terms = np.where(same, dist, np.maximum(0.0, margin - dist))
    comps["adv"] = float(terms.mean())
    if weights.adv != 0.0:
        g = (weights.adv * sign / n_pairs)[:, None] * ddist
        np.add.at(dz, ia, g)
        np.add.at(dz, ib, -g)

    joint = np.concatenate([z[ia], z[ib]], axis=1)
    logits, tape = nn.forward(bundle.subject_predictor, joint)
    comps["sub"], g = nn.cross_entropy_batch(logits, same.astype(np.int64))
    if weights.sub != 0.0:
        grads["subject_predictor"], back = nn.backward(tape, weights.sub * g)
        latent = z.shape[1]
        np.add.at(dz, ia, back[:, :latent])
        np.add.at(dz, ib, back[:, latent:])
    else:
        grads["subject_predictor"] = bundle.subject_predictor.zeros_like()

    grads["encoder"], _ = nn.backward(enc_tape, dz)
    return _total(comps, weights), comps, replace(bundle, **grads)


# ---------------------------------------------------------------- heads


def _values(signal):
    return np.asarray(getattr(signal, "values", signal), dtype=np.float64)


def encode(bundle: ModelBundle, signal) -> np.ndarray:
    return nn.forward(bundle.encoder, _values(signal))[0]


def classify(bundle: ModelBundle, signal) -> np.ndarray:
    return nn.forward(bundle.classifier, encode(bundle, signal))[0]


def predict_side(bundle: ModelBundle, signal) -> np.ndarray:
    return nn.forward(bundle.side_predictor, encode(bundle, signal))[0]


def reconstruct(bundle: ModelBundle, signal) -> np.ndarray:
    return nn.forward(bundle.decoder, encode(bundle, signal))[0]
