"""Length alignment and range normalization of 1-D evoked-potential signals.

Source recordings are longer and more densely sampled than target recordings.
They are cut into windows covering the target's duration, each window is
reduced to the target's point count by block averaging, and finally every
signal (source slice or target recording) is min-max scaled on its own.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySignal, InvalidTargetLength, SampleCountTooSmall


class Side(enum.IntEnum):
    LEFT = 0
    RIGHT = 1


class Label(enum.IntEnum):
    CONTROL = 0
    TINNITUS = 1


@dataclass(frozen=True, eq=False)
class RawSignal:
    values: np.ndarray
    subject_id: str
    side: Side
    class_label: Label
    dataset_id: str = "source"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise EmptySignal("a raw signal needs at least one sample")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "class_label", Label(self.class_label))

    @property
    def sample_count(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class AlignedSignal:
    """A length-aligned, [0, 1]-scaled signal.

    Instances compare by identity: two slices with equal values are still
    different signals as far as episode sampling is concerned.
    """

    values: np.ndarray
    subject_id: str
    side: Side
    class_label: Label
    dataset_id: str = "source"
    parent_offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "class_label", Label(self.class_label))


@dataclass(frozen=True)
class AlignmentConfig:
    window_size: int = 400
    stride: int = 20
    target_points: int = 131

    def __post_init__(self):
        if self.window_size < 1 or self.stride < 1 or self.target_points < 1:
            raise ValueError("window_size, stride and target_points must be >= 1")
        if self.window_size < self.target_points:
            raise InvalidTargetLength(
                f"window_size {self.window_size} < target_points {self.target_points}"
            )


@dataclass(frozen=True)
class Window:
    values: np.ndarray
    offset: int
    parent: RawSignal = field(repr=False)


def window_offsets(sample_count: int, window_size: int, stride: int) -> range:
    if sample_count < window_size:
        raise SampleCountTooSmall(sample_count, window_size)
    return range(0, sample_count - window_size + 1, stride)


def slice_sliding_window(raw: RawSignal, cfg: AlignmentConfig) -> list[Window]:
    """Cut ``raw`` into windows of ``cfg.window_size`` samples every ``cfg.stride``."""
    try:
        offsets = window_offsets(raw.sample_count, cfg.window_size, cfg.stride)
    except SampleCountTooSmall as exc:
        raise SampleCountTooSmall(exc.sample_count, exc.window_size, raw.subject_id) from None
    return [
        Window(raw.values[k:k + cfg.window_size], k, raw) for k in offsets
    ]


def block_sizes(n_s: int, n_g: int) -> np.ndarray:
    """Sizes of the contiguous averaging blocks used by :func:`downsample`.

    With ``l = n_s // n_g`` and ``m = n_s - l * n_g`` the first ``m`` blocks
    hold ``l + 1`` samples and the remaining ``n_g - m`` hold ``l``.
    """
    if n_g < 1 or n_g > n_s:
        raise InvalidTargetLength(f"cannot reduce {n_s} samples to {n_g} points")
    l, m = divmod(n_s, n_g)
    sizes = np.full(n_g, l, dtype=np.int64)
    sizes[:m] += 1
    return sizes


def downsample(window, n_g: int) -> np.ndarray:
    """Reduce ``window`` to ``n_g`` points by averaging contiguous blocks.

    Parameters
    ----------
    window : array_like, shape (n_s,)
        Samples of one sliding window.
    n_g : int
        Number of output points, ``1 <= n_g <= n_s``.

    Returns
    -------
    ndarray, shape (n_g,)
        Block means, in time order.
    """
    window = np.asarray(window, dtype=np.float64)
    sizes = block_sizes(window.size, n_g)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    return np.add.reduceat(window, starts) / sizes


def minmax_normalize(values) -> np.ndarray:
    """Scale a signal to [0, 1] using its own min and max.

    A constant signal maps to all zeros.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptySignal("cannot normalize an empty signal")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def align_signal(raw: RawSignal, cfg: AlignmentConfig, apply_window: bool = True) -> list[AlignedSignal]:
    if apply_window:
        pieces = [
            (minmax_normalize(downsample(w.values, cfg.target_points)), w.offset)
            for w in slice_sliding_window(raw, cfg)
        ]
    else:
        if raw.sample_count != cfg.target_points:
            raise InvalidTargetLength(
                f"subject {raw.subject_id}: expected {cfg.target_points} samples, "
                f"got {raw.sample_count}"
            )
        pieces = [(minmax_normalize(raw.values), 0)]
    return [
        AlignedSignal(v, raw.subject_id, raw.side, raw.class_label, raw.dataset_id, off)
        for v, off in pieces
    ]


def align_dataset(raws, cfg: AlignmentConfig, apply_window: bool = True) -> list[AlignedSignal]:
    """Align a whole dataset, preserving input order.

    Source datasets (``apply_window=True``) are sliced, down-sampled and then
    normalized; target datasets are only normalized and must already have
    ``cfg.target_points`` samples per signal.
    """
    out: list[AlignedSignal] = []
    for raw in raws:
        out.extend(align_signal(raw, cfg, apply_window))
    return out


def group_by_subject(signals) -> dict[str, list]:
    groups: dict[str, list] = {}
    for s in signals:
        groups.setdefault(s.subject_id, []).append(s)
    return groups
