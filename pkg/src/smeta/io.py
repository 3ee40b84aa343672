"""File formats: signal CSVs, checkpoints, traces, predictions, latents, configs.

Signal CSV rows are ``dataset_id,subject_id,side,label,v0,v1,...`` with side
``L``/``R`` and label ``0``/``1``. Aligned CSVs insert a ``parent_offset``
column before the values. Floats are written with ``repr`` so they read back
bit-identically.

Checkpoints are JSON documents; every array is stored as the hex dump of its
little-endian float64 bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import BadEnum, InconsistentWidth, ParseError, SchemaMismatch
from .models import PARTS, ModelBundle, Variant
from .nn import Activation, Layer, ParameterSet
from .signals import AlignedSignal, RawSignal, Side

SIDE_CODES = {"L": Side.LEFT, "R": Side.RIGHT}
SIDE_NAMES = {Side.LEFT: "L", Side.RIGHT: "R"}
META_COLUMNS = ["dataset_id", "subject_id", "side", "label"]
CHECKPOINT_FORMAT = "smeta-checkpoint"
SCHEMA_VERSION = 1


def _num(v) -> str:
    return repr(float(v))


# ---------------------------------------------------------------- signals


def _write_signals(path, signals, aligned: bool):
    signals = list(signals)
    width = len(signals[0].values) if signals else 0
    header = META_COLUMNS + (["parent_offset"] if aligned else []) + [f"v{j}" for j in range(width)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in signals:
            row = [s.dataset_id, s.subject_id, SIDE_NAMES[s.side], int(s.class_label)]
            if aligned:
                row.append(s.parent_offset)
            w.writerow(row + [_num(v) for v in s.values])


def save_dataset(signals, path):
    _write_signals(path, signals, aligned=False)


def save_aligned(signals, path):
    _write_signals(path, signals, aligned=True)


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty file") from None
        if header[:4] != META_COLUMNS:
            raise ParseError(1, f"header must start with {','.join(META_COLUMNS)}")
        aligned = len(header) > 4 and header[4] == "parent_offset"
        n_meta = 5 if aligned else 4
        n_values = len(header) - n_meta
        if n_values < 1:
            raise ParseError(1, "header has no value columns")
        for j, name in enumerate(header[n_meta:]):
            if name != f"v{j}":
                raise ParseError(1, f"expected column v{j}, found {name!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InconsistentWidth(lineno, f"{len(row)} fields, header has {len(header)}")
            dataset_id, subject_id, side, label = row[:4]
            if side not in SIDE_CODES:
                raise BadEnum(lineno, f"side must be L or R, got {side!r}")
            if label not in ("0", "1"):
                raise BadEnum(lineno, f"label must be 0 or 1, got {label!r}")
            try:
                values = np.array([float(v) for v in row[n_meta:]])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            if not np.all(np.isfinite(values)):
                raise ParseError(lineno, "non-finite signal value")
            offset = 0
            if aligned:
                try:
                    offset = int(row[4])
                except ValueError:
                    raise ParseError(lineno, f"bad parent_offset {row[4]!r}") from None
            yield lineno, dict(values=values, subject_id=subject_id, side=SIDE_CODES[side],
                                class_label=int(label), dataset_id=dataset_id), offset


def load_dataset(path) -> list[RawSignal]:
    """Read a signal CSV as raw signals (a ``parent_offset`` column is ignored)."""
    return [RawSignal(**fields) for _, fields, _ in _read_rows(path)]


def load_aligned(path) -> list[AlignedSignal]:
    """Read a signal CSV as aligned signals; values must already lie in [0, 1]."""
    out = []
    for lineno, fields, offset in _read_rows(path):
        v = fields["values"]
        if v.min() < 0.0 or v.max() > 1.0:
            raise ParseError(lineno, "aligned values must lie in [0, 1]; run `align` first")
        out.append(AlignedSignal(parent_offset=offset, **fields))
    return out


# ---------------------------------------------------------------- checkpoints


def _hex(a: np.ndarray) -> str:
    return np.ascontiguousarray(a, dtype="<f8").tobytes().hex()


def _unhex(text: str, shape) -> np.ndarray:
    return np.frombuffer(bytes.fromhex(text), dtype="<f8").astype(np.float64).reshape(shape)


def bundle_to_dict(bundle: ModelBundle, metadata: dict | None = None) -> dict:
    parts = {}
    for name in PARTS:
        parts[name] = [
            {"name": l.name, "activation": l.activation.value,
             "shape": list(l.weights.shape), "weights": _hex(l.weights), "biases": _hex(l.biases)}
            for l in getattr(bundle, name)
        ]
    return {"format": CHECKPOINT_FORMAT, "schema_version": SCHEMA_VERSION,
            "variant": bundle.variant.value, "parts": parts, "metadata": metadata or {}}


def bundle_from_dict(doc: dict) -> ModelBundle:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaMismatch("not an smeta checkpoint")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"checkpoint schema {doc.get('schema_version')}, this build reads {SCHEMA_VERSION}"
        )
    parts = {}
    for name in PARTS:
        layers = []
        for entry in doc["parts"][name]:
            out_dim, in_dim = entry["shape"]
            layers.append(Layer(entry["name"], _unhex(entry["weights"], (out_dim, in_dim)),
                                _unhex(entry["biases"], (out_dim,)), Activation(entry["activation"])))
        parts[name] = ParameterSet(layers)
    return ModelBundle(**parts, variant=Variant(doc["variant"]))


def save_checkpoint(bundle: ModelBundle, path, metadata: dict | None = None):
    text = json.dumps(bundle_to_dict(bundle, metadata), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n")


def load_checkpoint(path) -> ModelBundle:
    return bundle_from_dict(json.loads(Path(path).read_text()))


def load_checkpoint_metadata(path) -> dict:
    return json.loads(Path(path).read_text()).get("metadata", {})


# ---------------------------------------------------------------- tables


def write_trace(trace, path, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in trace:
            w.writerow([row["epoch"]] + [
                "" if isinstance(row[c], float) and math.isnan(row[c]) else _num(row[c])
                for c in columns[1:]
            ])


def write_predictions(predictions, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "side", "true_label", "pred_label", "score"])
        for p in predictions:
            w.writerow([p.subject_id, SIDE_NAMES[Side(p.side)], p.true_label, p.pred_label, _num(p.score)])


def write_latents(rows, path, latent_dim: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "side", "label"] + [f"z{j}" for j in range(latent_dim)])
        for subject_id, side, label, z in rows:
            w.writerow([subject_id, SIDE_NAMES[Side(side)], label] + [_num(v) for v in z])


def write_table(rows, path):
    rows = list(rows)
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow(["NA" if v is None else (_num(v) if isinstance(v, float) else v)
                        for v in row.values()])


# ---------------------------------------------------------------- config files


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys use ``_`` or ``-``."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
