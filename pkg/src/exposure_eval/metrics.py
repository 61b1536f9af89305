"""Exposure-grouped confusion matrices, IoU/mIoU and the exposure-aware F-score.

Every metric is derived from a :class:`GroupedConfusion`, an integer
``(G, C, C)`` array indexed ``[bin, ground_truth, prediction]``. Adding two
accumulators is exact, so per-image partials can be reduced in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import DomainError, LabelFormatError, MetricUndefinedError, ShapeError
from .exposure import ExposureBins, ExposureMap
from .labels import INVALID, LabelMap

MACRO = "macro"
MICRO = "micro"
SCHEMA_VERSION = 1


@dataclass
class GroupedConfusion:
    class_count: int
    bins: ExposureBins = field(default_factory=ExposureBins)
    counts: np.ndarray | None = None

    def __post_init__(self):
        shape = (self.bins.bin_count, self.class_count, self.class_count)
        if self.counts is None:
            self.counts = np.zeros(shape, dtype=np.int64)
        else:
            self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
            if self.counts.shape != shape:
                raise ShapeError(f"counts shape {self.counts.shape} != {shape}")
            if (self.counts < 0).any():
                raise DomainError("confusion counts must be non-negative")

    def _check_compatible(self, other):
        if other.class_count != self.class_count or other.bins != self.bins:
            raise ShapeError("cannot merge accumulators with different classes or bins")

    def __add__(self, other: "GroupedConfusion") -> "GroupedConfusion":
        self._check_compatible(other)
        return GroupedConfusion(self.class_count, self.bins, self.counts + other.counts)

    merge = __add__

    def __eq__(self, other):
        if not isinstance(other, GroupedConfusion):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.bins == other.bins
            and np.array_equal(self.counts, other.counts)
        )

    def total(self) -> np.ndarray:
        """Confusion matrix summed over exposure bins."""
        return self.counts.sum(axis=0)

    def group_pixel_counts(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 2))


def accumulate(gt: LabelMap, pred: LabelMap, exposure: ExposureMap, acc: GroupedConfusion) -> GroupedConfusion:
    """Add one image into ``acc`` in place and return it.

    Pixels whose ground truth is INVALID are skipped; predictions must be
    total, so INVALID in ``pred`` is an error.
    """
    if not (gt.shape == pred.shape == exposure.values.shape):
        raise ShapeError(f"sizes differ: gt {gt.shape}, pred {pred.shape}, exposure {exposure.values.shape}")
    bad = kernels.grouped_confusion(
        gt.labels.ravel(),
        pred.labels.ravel(),
        exposure.values.ravel(),
        acc.bins.edges,
        acc.class_count,
        acc.counts,
        INVALID,
    )
    if bad >= 0:
        y, x = divmod(bad, gt.width)
        p, t = int(pred.labels[y, x]), int(gt.labels[y, x])
        if p == INVALID:
            raise LabelFormatError(f"prediction is INVALID at (x={x}, y={y}); predictions must be total")
        if p >= acc.class_count or (t != INVALID and t >= acc.class_count):
            raise LabelFormatError(f"class id out of range at (x={x}, y={y}): gt {t}, pred {p}")
        raise DomainError(f"exposure {exposure.values[y, x]!r} at (x={x}, y={y}) outside [0, 1]")
    return acc


def per_class_iou(matrix: np.ndarray) -> dict[int, float]:
    """IoU per class over a C x C matrix, omitting classes with zero union."""
    tp = np.diag(matrix)
    union = matrix.sum(axis=0) + matrix.sum(axis=1) - tp
    return {int(c): float(tp[c] / union[c]) for c in np.flatnonzero(union)}


def iou(acc: GroupedConfusion) -> tuple[dict[int, float], float]:
    ious = per_class_iou(acc.total())
    if not ious:
        raise MetricUndefinedError("mIoU undefined: no class occurs in ground truth or prediction")
    return ious, float(np.mean(list(ious.values())))


def f_beta(precision: float, recall: float, beta: float = 1.0) -> float:
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    b2 = beta * beta
    denom = b2 * precision + recall
    return (1 + b2) * precision * recall / denom if denom > 0 else 0.0


def group_precision_recall(matrix: np.ndarray, averaging: str = MACRO) -> tuple[float, float] | None:
    """Precision and recall of one exposure group; None when the group is empty.

    Macro averages over classes with ground-truth support in the group; a
    supported class that is never predicted has precision 0. Micro pools
    counts over classes, which makes both equal to pixel accuracy.
    """
    support = matrix.sum(axis=1)
    predicted = matrix.sum(axis=0)
    tp = np.diag(matrix)
    present = support > 0
    if not present.any():
        return None
    if averaging == MACRO:
        recall = tp[present] / support[present]
        safe = np.where(predicted[present] > 0, predicted[present], 1)
        precision = np.where(predicted[present] > 0, tp[present] / safe, 0.0)
        return float(precision.mean()), float(recall.mean())
    if averaging == MICRO:
        hits = tp.sum()
        return float(hits / predicted.sum()), float(hits / support.sum())
    raise DomainError(f"averaging must be {MACRO!r} or {MICRO!r}, got {averaging!r}")


def ef1(acc: GroupedConfusion, beta: float = 1.0, averaging: str = MACRO) -> tuple[list[float | None], float]:
    """Per-group exposure F-score and its mean over populated groups.

    Empty groups get ``None`` and are left out of the mean.
    """
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    scores: list[float | None] = []
    for matrix in acc.counts:
        pr = group_precision_recall(matrix, averaging)
        scores.append(None if pr is None else f_beta(pr[0], pr[1], beta))
    populated = [s for s in scores if s is not None]
    if not populated:
        raise MetricUndefinedError("mEF1 undefined: every exposure group is empty")
    return scores, float(np.mean(populated))


@dataclass
class EvalReport:
    per_class_iou: dict[int, float]
    miou: float
    ef1_per_group: list[float | None]
    mef1: float
    group_pixel_counts: list[int]
    precision_per_group: list[float | None]
    recall_per_group: list[float | None]
    averaging: str
    beta: float
    bins: ExposureBins
    class_names: list[str] | None = None

    @property
    def populated_groups(self) -> int:
        return sum(s is not None for s in self.ef1_per_group)

    def to_dict(self) -> dict:
        names = self.class_names
        return {
            "schema_version": SCHEMA_VERSION,
            "per_class_iou": {(names[c] if names else str(c)): v for c, v in sorted(self.per_class_iou.items())},
            "miou": self.miou,
            "ef1_per_group": self.ef1_per_group,
            "mef1": self.mef1,
            "group_pixel_counts": self.group_pixel_counts,
            "populated_groups": self.populated_groups,
            "precision_per_group": self.precision_per_group,
            "recall_per_group": self.recall_per_group,
            "bin_edges": [float(e) for e in self.bins.edges],
            "averaging": self.averaging,
            "beta": self.beta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def ef1_csv(self) -> str:
        """One header row of bin ranges and one row of EF1_g, low exposure first."""
        cells = ["" if s is None else repr(s) for s in self.ef1_per_group]
        return ",".join(self.bins.labels()) + "\n" + ",".join(cells) + "\n"


def evaluate(acc: GroupedConfusion, beta: float = 1.0, averaging: str = MACRO, class_names=None) -> EvalReport:
    ious, miou = iou(acc)
    scores, mef1 = ef1(acc, beta, averaging)
    prs = [group_precision_recall(m, averaging) for m in acc.counts]
    return EvalReport(
        per_class_iou=ious,
        miou=miou,
        ef1_per_group=scores,
        mef1=mef1,
        group_pixel_counts=[int(n) for n in acc.group_pixel_counts()],
        precision_per_group=[None if pr is None else pr[0] for pr in prs],
        recall_per_group=[None if pr is None else pr[1] for pr in prs],
        averaging=averaging,
        beta=float(beta),
        bins=acc.bins,
        class_names=list(class_names) if class_names else None,
    )
