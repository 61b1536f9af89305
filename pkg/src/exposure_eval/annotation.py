"""Three-annotator consensus: A and B label independently, reviewer C overrides sparsely.

Per-pixel rule, with ``o`` the optional override:

* at least two INVALID votes among {a, b, o}      -> INVALID
* a == b, o absent or o == a                      -> a, agree-accepted
* a == b, o == INVALID (outvoted)                 -> a, majority-selected
* a == b, o another class                         -> o, discussion-required
* a != b, o in {a, b}                             -> o, majority-selected
* a != b, o another class                         -> o, discussion-required
* a != b, o absent or a lone INVALID vote         -> INVALID, discussion-required (pending)

Pending pixels are written as INVALID so a batch run never invents a label.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .errors import LabelFormatError, ShapeError
from .labels import INVALID, LabelMap

AGREE = "agree-accepted"
MAJORITY = "majority-selected"
DISCUSSION = "discussion-required"
RESOLUTIONS = (AGREE, MAJORITY, DISCUSSION)

_NO_OVERRIDE = -1


@dataclass(frozen=True)
class ConsensusDecision:
    pixel: int
    a_label: int
    b_label: int
    final_label: int
    resolution: str
    override: int | None = None

    def to_json(self, image: str | None = None) -> str:
        obj = asdict(self)
        if image is not None:
            obj = {"image": image, **obj}
        return json.dumps(obj, sort_keys=True)


def _override_grid(shape, class_count, c_overrides) -> np.ndarray:
    h, w = shape
    grid = np.full(h * w, _NO_OVERRIDE, dtype=np.int16)
    for key, label in (c_overrides or {}).items():
        if isinstance(key, tuple):
            x, y = key
            if not (0 <= x < w and 0 <= y < h):
                raise ShapeError(f"override at (x={x}, y={y}) lies outside a {w}x{h} map")
            idx = y * w + x
        else:
            idx = int(key)
            if not 0 <= idx < h * w:
                raise ShapeError(f"override pixel index {idx} outside a {w}x{h} map")
        label = int(label)
        if not (0 <= label < class_count or label == INVALID):
            raise LabelFormatError(f"override label {label} is not a class id or {INVALID}")
        grid[idx] = label
    return grid


def merge_annotations(
    a: LabelMap, b: LabelMap, c_overrides: Mapping | None = None
) -> tuple[LabelMap, list[ConsensusDecision]]:
    """Merge two annotations with sparse reviewer overrides.

    ``c_overrides`` maps either a flat pixel index or an ``(x, y)`` tuple to a
    class id or INVALID. Returns the merged map and one decision per pixel
    that was non-trivial (A and B disagree, or an override was given), in
    row-major pixel order.
    """
    if a.shape != b.shape:
        raise ShapeError(f"annotation sizes differ: {a.shape} vs {b.shape}")
    if a.class_count != b.class_count:
        raise ShapeError(f"class counts differ: {a.class_count} vs {b.class_count}")
    av = a.labels.ravel().astype(np.int16)
    bv = b.labels.ravel().astype(np.int16)
    ov = _override_grid(a.shape, a.class_count, c_overrides)
    has_o = ov != _NO_OVERRIDE

    invalid_votes = (av == INVALID).astype(np.int8) + (bv == INVALID) + (ov == INVALID)
    voted_invalid = invalid_votes >= 2
    same = av == bv

    final = np.empty_like(av)
    res = np.empty(av.shape, dtype=np.int8)

    agree = same & (~has_o | (ov == av))
    final[agree] = av[agree]
    res[agree] = 0

    outvoted = same & has_o & (ov == INVALID) & ~voted_invalid
    final[outvoted] = av[outvoted]
    res[outvoted] = 1

    relabel = same & has_o & (ov != av) & (ov != INVALID)
    final[relabel] = ov[relabel]
    res[relabel] = 2

    picked = ~same & has_o & ((ov == av) | (ov == bv))
    final[picked] = ov[picked]
    res[picked] = 1

    fresh = ~same & has_o & (ov != av) & (ov != bv) & (ov != INVALID)
    final[fresh] = ov[fresh]
    res[fresh] = 2

    pending = ~same & ~(picked | fresh)
    final[pending] = INVALID
    res[pending] = 2

    # invalid majority overrides every row above; a third vote being outvoted is a majority call
    flip = voted_invalid & ~agree
    final[voted_invalid] = INVALID
    res[flip] = 1

    merged = LabelMap(final.astype(np.uint8).reshape(a.shape), a.class_count)
    decisions = []
    for idx in np.flatnonzero(~same | has_o):
        o = int(ov[idx])
        decisions.append(
            ConsensusDecision(
                pixel=int(idx),
                a_label=int(av[idx]),
                b_label=int(bv[idx]),
                final_label=int(final[idx]),
                resolution=RESOLUTIONS[res[idx]],
                override=None if o == _NO_OVERRIDE else o,
            )
        )
    return merged, decisions


@dataclass
class DisagreementStats:
    """Raw counts behind the disagreement ratios; add two to pool datasets."""

    total_pixels: int = 0
    differing_pixels: int = 0
    corrected_pixels: int = 0
    class_pixels: dict[int, int] = field(default_factory=dict)
    class_errors: dict[int, int] = field(default_factory=dict)

    @property
    def differing_ratio(self) -> float:
        return self.differing_pixels / self.total_pixels if self.total_pixels else 0.0

    @property
    def corrected_among_differing(self) -> float:
        return self.corrected_pixels / self.differing_pixels if self.differing_pixels else 0.0

    @property
    def per_class_error(self) -> dict[int, float]:
        # each final pixel is checked against both annotators
        return {c: self.class_errors.get(c, 0) / (2 * n) for c, n in sorted(self.class_pixels.items()) if n}

    def __add__(self, other: "DisagreementStats") -> "DisagreementStats":
        def add(x, y):
            out = dict(x)
            for k, v in y.items():
                out[k] = out.get(k, 0) + v
            return out

        return DisagreementStats(
            self.total_pixels + other.total_pixels,
            self.differing_pixels + other.differing_pixels,
            self.corrected_pixels + other.corrected_pixels,
            add(self.class_pixels, other.class_pixels),
            add(self.class_errors, other.class_errors),
        )

    def to_dict(self, class_names=None) -> dict:
        def key(c):
            return class_names[c] if class_names else str(c)

        return {
            "total_pixels": self.total_pixels,
            "differing_pixels": self.differing_pixels,
            "differing_ratio": self.differing_ratio,
            "corrected_pixels": self.corrected_pixels,
            "corrected_among_differing": self.corrected_among_differing,
            "per_class_error": {key(c): v for c, v in self.per_class_error.items()},
        }


def disagreement_stats(a: LabelMap, b: LabelMap, final: LabelMap) -> DisagreementStats:
    """Disagreement between A and B, judged against the merged map.

    A differing pixel counts as corrected when the merge settled it on a
    class id (rather than leaving it INVALID). Per-class error for class c
    is the share of annotator labels that miss c among pixels whose final
    label is c.
    """
    if not (a.shape == b.shape == final.shape):
        raise ShapeError(f"map sizes differ: {a.shape}, {b.shape}, {final.shape}")
    av, bv, fv = a.labels.ravel(), b.labels.ravel(), final.labels.ravel()
    differ = av != bv
    corrected = differ & (fv != INVALID)
    valid = fv != INVALID
    class_pixels = np.bincount(fv[valid], minlength=final.class_count)
    errors = np.bincount(fv[valid & (av != fv)], minlength=final.class_count)
    errors += np.bincount(fv[valid & (bv != fv)], minlength=final.class_count)
    present = np.flatnonzero(class_pixels)
    return DisagreementStats(
        total_pixels=int(av.size),
        differing_pixels=int(differ.sum()),
        corrected_pixels=int(corrected.sum()),
        class_pixels={int(c): int(class_pixels[c]) for c in present},
        class_errors={int(c): int(errors[c]) for c in present},
    )
