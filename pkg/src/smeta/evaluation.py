"""Confusion-matrix metrics, per-ear report slices and ROC/AUC.

Tinnitus (class 1) is the positive class. Undefined ratios (0/0) are reported
as ``None`` and rendered ``NA``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, LengthMismatch, SingleClassInput

METRIC_NAMES = ("npv", "tnr", "n_f1", "ppv", "tpr", "p_f1", "acc")
METRIC_LABELS = {"npv": "NPV", "tnr": "TNR", "n_f1": "N-F1", "ppv": "PPV",
                 "tpr": "TPR", "p_f1": "P-F1", "acc": "Acc"}
SLICES = ("both", "left", "right")


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.tn + other.tn,
                         self.fp + other.fp, self.fn + other.fn)


def confusion(preds, labels) -> Confusion:
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{preds.size} predictions for {labels.size} labels")
    if preds.size == 0:
        raise EmptyInput("no predictions to score")
    return Confusion(
        tp=int(np.sum((preds == 1) & (labels == 1))),
        tn=int(np.sum((preds == 0) & (labels == 0))),
        fp=int(np.sum((preds == 1) & (labels == 0))),
        fn=int(np.sum((preds == 0) & (labels == 1))),
    )


def _ratio(num, den):
    return num / den if den else None


def _harmonic(a, b):
    if a is None or b is None or a + b == 0:
        return None
    return 2 * a * b / (a + b)


def metrics(c: Confusion) -> dict:
    """NPV, TNR, N-F1, PPV, TPR, P-F1 and accuracy of a confusion matrix."""
    npv = _ratio(c.tn, c.fn + c.tn)
    tnr = _ratio(c.tn, c.fp + c.tn)
    ppv = _ratio(c.tp, c.tp + c.fp)
    tpr = _ratio(c.tp, c.tp + c.fn)
    return {
        "npv": npv, "tnr": tnr, "n_f1": _harmonic(npv, tnr),
        "ppv": ppv, "tpr": tpr, "p_f1": _harmonic(ppv, tpr),
        "acc": _ratio(c.tp + c.tn, c.total),
    }


def roc_auc(scores, labels):
    """ROC points over distinct score thresholds and the trapezoidal AUC.

    Thresholds run from the highest score down; every group of tied scores is
    one step. Points start at (0, 0) and end at (1, 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{scores.size} scores for {labels.size} labels")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("ROC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    tps = np.concatenate(([0], np.cumsum(y == 1)[ends]))
    fps = np.concatenate(([0], np.cumsum(y == 0)[ends]))
    # integer twice-area keeps the trapezoid sum exact
    twice_area = int(np.sum(np.diff(fps) * (tps[1:] + tps[:-1])))
    auc = twice_area / (2 * n_pos * n_neg)
    points = [(int(f) / n_neg, int(t) / n_pos) for f, t in zip(fps, tps)]
    return points, auc


@dataclass
class SliceReport:
    confusion: Confusion
    metrics: dict
    roc_points: list | None = None
    auc: float | None = None

    def to_dict(self) -> dict:
        c = self.confusion
        return {
            "confusion": {"tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn},
            "metrics": {k: self.metrics[k] for k in METRIC_NAMES},
            "roc_points": [list(p) for p in self.roc_points] if self.roc_points else None,
            "auc": self.auc,
        }


@dataclass
class EvalReport:
    slices: dict = field(default_factory=dict)

    @property
    def both(self) -> SliceReport:
        return self.slices["both"]

    def __getitem__(self, key):
        return self.both.metrics[key]

    @property
    def auc(self):
        return self.both.auc

    @property
    def roc_points(self):
        return self.both.roc_points

    def to_dict(self) -> dict:
        return {"slices": {name: self.slices[name].to_dict() for name in SLICES}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        head = f"{'slice':<6} " + " ".join(f"{METRIC_LABELS[k]:>6}" for k in METRIC_NAMES)
        lines = [head + f" {'AUC':>6}   tp  tn  fp  fn", "-" * (len(head) + 24)]
        for name in SLICES:
            sl = self.slices[name]
            cells = " ".join(f"{fmt(sl.metrics[k]):>6}" for k in METRIC_NAMES)
            c = sl.confusion
            lines.append(f"{name:<6} {cells} {fmt(sl.auc):>6} {c.tp:4d}{c.tn:4d}{c.fp:4d}{c.fn:4d}")
        return "\n".join(lines) + "\n"


def fmt(value) -> str:
    return "NA" if value is None else f"{value:.3f}"


def _slice(preds, labels, scores) -> SliceReport:
    if len(preds) == 0:
        c = Confusion()
        return SliceReport(c, metrics(c))
    c = confusion(preds, labels)
    report = SliceReport(c, metrics(c))
    if c.tp + c.fn > 0 and c.tn + c.fp > 0:
        report.roc_points, report.auc = roc_auc(scores, labels)
    return report


def slice_report(predictions) -> EvalReport:
    """Both/Left/Right report from records with ``side``, ``true_label``,
    ``pred_label`` and ``score`` attributes."""
    report = EvalReport()
    selectors = {"both": lambda p: True,
                 "left": lambda p: int(p.side) == 0,
                 "right": lambda p: int(p.side) == 1}
    for name in SLICES:
        chosen = [p for p in predictions if selectors[name](p)]
        report.slices[name] = _slice(
            [int(p.pred_label) for p in chosen],
            [int(p.true_label) for p in chosen],
            [float(p.score) for p in chosen],
        )
    return report
