"""Prediction on target subjects, with optional per-subject side fine-tuning.

Side fine-tuning takes a few gradient steps on the ear-side loss alone, using
only a subject's signals and their side labels, then classifies that
subject's signals with the adapted copy. Class labels never enter that path.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .errors import EmptySubject, MissingSideLabel
from .evaluation import EvalReport, slice_report
from .models import ModelBundle, encode
from .signals import group_by_subject


@dataclass(frozen=True)
class SubjectTestSet:
    subject_id: str
    signals: list


@dataclass(frozen=True)
class InferenceConfig:
    side_aware: bool = True
    beta: float = 1e-3
    steps: int = 1
    scope: str = "encoder"  # "encoder": encoder + side head; "all": every part

    def __post_init__(self):
        if self.scope not in ("encoder", "all"):
            raise ValueError(f"unknown fine-tune scope {self.scope!r}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


@dataclass(frozen=True)
class Prediction:
    subject_id: str
    side: int
    true_label: int
    pred_label: int
    score: float
    probabilities: tuple


def subjects_from_signals(signals) -> list[SubjectTestSet]:
    return [SubjectTestSet(sid, sigs) for sid, sigs in group_by_subject(signals).items()]


def _side_view(subject: SubjectTestSet):
    """Values and side labels only; the fine-tuning path never sees class labels."""
    if not subject.signals:
        raise EmptySubject(f"subject {subject.subject_id} has no signals")
    sides = []
    for s in subject.signals:
        side = getattr(s, "side", None)
        if side is None:
            raise MissingSideLabel(f"subject {subject.subject_id}: signal without side label")
        sides.append(int(side))
    x = np.stack([np.asarray(s.values, dtype=np.float64) for s in subject.signals])
    return x, np.array(sides)


def ear_loss(bundle: ModelBundle, x, sides):
    """Mean side cross-entropy and its gradient restricted to encoder + side head."""
    z, enc_tape = nn.forward(bundle.encoder, x)
    logits, tape = nn.forward(bundle.side_predictor, z)
    loss, g = nn.cross_entropy_batch(logits, sides)
    g_side, dz = nn.backward(tape, g)
    g_enc, _ = nn.backward(enc_tape, dz)
    grad = bundle.zeros_like()
    return loss, replace(grad, encoder=g_enc, side_predictor=g_side)


def side_finetune(bundle: ModelBundle, subject: SubjectTestSet, beta: float = 1e-3,
                  steps: int = 1, scope: str = "encoder") -> ModelBundle:
    """Subject-specific copy of ``bundle`` after ``steps`` side-loss SGD steps.

    With ``scope="encoder"`` only the encoder and side predictor move. The
    side loss has no gradient through the decoder, classifier or subject
    predictor, so ``scope="all"`` differs only in not masking them explicitly.
    """
    x, sides = _side_view(subject)
    theta = bundle
    for _ in range(steps):
        _, grad = ear_loss(theta, x, sides)
        if scope == "encoder":
            grad = replace(bundle.zeros_like(), encoder=grad.encoder,
                           side_predictor=grad.side_predictor)
        theta = nn.axpy_params(theta, beta, grad)
    if theta is bundle:
        theta = bundle.map(np.copy)
    return theta


def predict(bundle: ModelBundle, signal) -> tuple[np.ndarray, int, float]:
    """Class probabilities, predicted label (ties go to Control) and tinnitus score."""
    logits = nn.forward(bundle.classifier, encode(bundle, signal))[0]
    probs = nn.softmax(logits)
    label = 1 if probs[1] > probs[0] else 0
    return probs, label, float(probs[1])


def side_accuracy(bundle: ModelBundle, signals) -> float:
    x = np.stack([np.asarray(s.values, dtype=np.float64) for s in signals])
    z, _ = nn.forward(bundle.encoder, x)
    logits, _ = nn.forward(bundle.side_predictor, z)
    pred = (logits[:, 1] > logits[:, 0]).astype(int)
    return float(np.mean(pred == np.array([int(s.side) for s in signals])))


def _predict_subject(bundle, subject: SubjectTestSet) -> list[Prediction]:
    out = []
    for s in subject.signals:
        probs, label, score = predict(bundle, s)
        out.append(Prediction(subject.subject_id, int(s.side), int(s.class_label),
                              label, score, (float(probs[0]), float(probs[1]))))
    return out


def evaluate_subjects(bundle: ModelBundle, subjects, cfg: InferenceConfig = InferenceConfig()
                      ) -> tuple[list[Prediction], EvalReport]:
    """Predict every subject's signals and build the Both/Left/Right report.

    ``subjects`` may be a list of :class:`SubjectTestSet` or of aligned signals.
    """
    subjects = list(subjects)
    if subjects and not isinstance(subjects[0], SubjectTestSet):
        subjects = subjects_from_signals(subjects)
    predictions: list[Prediction] = []
    for subject in subjects:
        theta = bundle
        if cfg.side_aware:
            theta = side_finetune(bundle, subject, cfg.beta, cfg.steps, cfg.scope)
        predictions.extend(_predict_subject(theta, subject))
    return predictions, slice_report(predictions)


def extract_latent(bundle: ModelBundle, signals) -> list[tuple]:
    """``(subject_id, side, class_label, latent)`` for every signal, in order."""
    signals = list(signals)
    if not signals:
        return []
    x = np.stack([np.asarray(s.values, dtype=np.float64) for s in signals])
    z, _ = nn.forward(bundle.encoder, x)
    return [(s.subject_id, int(s.side), int(s.class_label), z[k])
            for k, s in enumerate(signals)]
