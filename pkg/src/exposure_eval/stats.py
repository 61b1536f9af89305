"""Dataset statistics and class-balanced train/test splitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._parallel import parallel_map
from .errors import ConfigError, DomainError
from .labels import DEFAULT_CLASS_COUNT, INVALID, read_label_png

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Entry:
    image: str
    label: str
    city: str | None = None

    @property
    def stem(self) -> str:
        return Path(self.label).stem


@dataclass
class DatasetIndex:
    entries: list[Entry]
    class_count: int = DEFAULT_CLASS_COUNT
    root: Path | None = None

    def __len__(self):
        return len(self.entries)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() or self.root is None else self.root / p

    def subset(self, positions: Sequence[int]) -> "DatasetIndex":
        return DatasetIndex([self.entries[i] for i in positions], self.class_count, self.root)

    def to_manifest(self) -> str:
        lines = []
        for e in self.entries:
            cols = [e.image, e.label] + ([e.city] if e.city else [])
            lines.append("\t".join(cols))
        return "\n".join(lines) + ("\n" if lines else "")

    def city_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            key = e.city or ""
            counts[key] = counts.get(key, 0) + 1
        return dict(sorted(counts.items()))


def parse_manifest(text: str, class_count: int = DEFAULT_CLASS_COUNT, root=None, name="<manifest>") -> DatasetIndex:
    """Parse ``image<TAB>label[<TAB>city]`` lines; blank lines and ``#`` comments are skipped."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.rstrip("\r").split("\t")
        if len(cols) not in (2, 3):
            raise ConfigError(f"{name}:{lineno}: expected 2 or 3 tab-separated columns, got {len(cols)}")
        image, label = cols[0], cols[1]
        if Path(image).stem != Path(label).stem:
            raise ConfigError(f"{name}:{lineno}: image {image!r} and label {label!r} stems differ")
        entries.append(Entry(image, label, cols[2] if len(cols) == 3 and cols[2] else None))
    return DatasetIndex(entries, class_count, Path(root) if root is not None else None)


def read_manifest(path, class_count: int = DEFAULT_CLASS_COUNT) -> DatasetIndex:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read manifest ({exc})") from exc
    return parse_manifest(text, class_count, root=path.parent, name=str(path))


def label_histograms(index: DatasetIndex, jobs: int = 1) -> np.ndarray:
    """(N, 256) raw id counts per label file; column 255 holds INVALID."""

    def one(entry):
        path = index.resolve(entry.label)
        if not path.exists():
            raise ConfigError(f"{path}: label file not found")
        m = read_label_png(path, index.class_count)
        return np.bincount(m.labels.ravel(), minlength=256)

    if not index.entries:
        return np.zeros((0, 256), dtype=np.int64)
    return np.stack(parallel_map(one, index.entries, jobs)).astype(np.int64)


@dataclass
class ClassDistribution:
    per_class_pixels: dict[int, int]
    invalid_pixels: int = 0

    @property
    def log_scale_view(self) -> dict[int, float]:
        return {c: math.log10(n) for c, n in self.per_class_pixels.items() if n > 0}

    @property
    def total_pixels(self) -> int:
        return sum(self.per_class_pixels.values()) + self.invalid_pixels

    def __add__(self, other):
        out = dict(self.per_class_pixels)
        for c, n in other.per_class_pixels.items():
            out[c] = out.get(c, 0) + n
        return ClassDistribution(dict(sorted(out.items())), self.invalid_pixels + other.invalid_pixels)


def _distribution(hist: np.ndarray, class_count: int) -> ClassDistribution:
    per = hist[:class_count]
    return ClassDistribution({int(c): int(per[c]) for c in np.flatnonzero(per)}, int(hist[INVALID]))


def class_distribution(index: DatasetIndex, jobs: int = 1, histograms: np.ndarray | None = None) -> ClassDistribution:
    if not index.entries:
        raise ConfigError("class distribution needs a non-empty index")
    hist = label_histograms(index, jobs) if histograms is None else histograms
    return _distribution(hist.sum(axis=0), index.class_count)


def invalid_ratio(index: DatasetIndex, jobs: int = 1, histograms: np.ndarray | None = None) -> float:
    if not index.entries:
        raise ConfigError("invalid ratio needs a non-empty index")
    hist = label_histograms(index, jobs) if histograms is None else histograms
    total = hist.sum()
    return float(hist[:, INVALID].sum() / total) if total else 0.0


def split_sizes(n: int, train_fraction: float) -> tuple[int, int]:
    """``round(n * fraction)`` (halves round up) training entries, the rest for test."""
    if n < 2:
        raise DomainError(f"need at least 2 entries to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise DomainError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = int(math.floor(n * train_fraction + 0.5))
    if n_train in (0, n):
        raise DomainError(f"fraction {train_fraction} of {n} entries leaves one side empty")
    return n_train, n - n_train


def l1_divergence(side_counts: np.ndarray, target: np.ndarray) -> np.ndarray:
    """L1 distance between normalised class histograms (rows of ``side_counts``) and ``target``."""
    side_counts = np.asarray(side_counts, dtype=np.float64)
    mass = side_counts.sum(axis=-1, keepdims=True)
    p = np.divide(side_counts, mass, out=np.zeros_like(side_counts), where=mass > 0)
    return np.abs(p - target).sum(axis=-1)


def split_divergence(hists: np.ndarray, train_mask: np.ndarray) -> tuple[float, float]:
    hists = np.asarray(hists, dtype=np.float64)
    total = hists.sum(axis=0)
    target = total / total.sum() if total.sum() > 0 else np.zeros_like(total)
    return (
        float(l1_divergence(hists[train_mask].sum(axis=0), target)),
        float(l1_divergence(hists[~train_mask].sum(axis=0), target)),
    )


def _greedy(hists, n_train, order, target):
    n_test = len(hists) - n_train
    train_sum = np.zeros(hists.shape[1])
    test_sum = np.zeros(hists.shape[1])
    taken = [0, 0]
    mask = np.zeros(len(hists), dtype=bool)
    for i in order:
        h = hists[i]
        if taken[0] == n_train:
            side = 1
        elif taken[1] == n_test:
            side = 0
        else:
            d_tr, d_te = l1_divergence(train_sum, target), l1_divergence(test_sum, target)
            to_train = max(l1_divergence(train_sum + h, target), d_te)
            to_test = max(d_tr, l1_divergence(test_sum + h, target))
            if to_train != to_test:
                side = 0 if to_train < to_test else 1
            else:
                # tie: feed the side that is further from full
                side = 0 if (n_train - taken[0]) / n_train >= (n_test - taken[1]) / n_test else 1
        if side == 0:
            train_sum += h
            mask[i] = True
        else:
            test_sum += h
        taken[side] += 1
    return mask


def _refine(hists, mask, target, max_pairs):
    """Steepest-descent pairwise swaps between sides until no swap helps.

    Never scores more than ``max_pairs`` candidate swaps. Sizes never change.
    """
    mask = mask.copy()
    train_sum = hists[mask].sum(axis=0)
    test_sum = hists[~mask].sum(axis=0)
    best = max(l1_divergence(train_sum, target), l1_divergence(test_sum, target))
    ins = np.flatnonzero(mask)
    sweep = len(ins) * (len(mask) - len(ins))
    spent = 0
    while spent + sweep <= max_pairs:
        ins, outs = np.flatnonzero(mask), np.flatnonzero(~mask)
        chunk = max(1, 4_000_000 // (len(outs) * hists.shape[1]))
        top, top_i, top_j = best, -1, -1
        for start in range(0, len(ins), chunk):
            rows = ins[start : start + chunk]
            delta = hists[outs][None, :, :] - hists[rows][:, None, :]
            score = np.maximum(
                l1_divergence(train_sum + delta, target), l1_divergence(test_sum - delta, target)
            )
            k = int(np.argmin(score))
            if score.flat[k] < top - 1e-12:
                top = float(score.flat[k])
                top_i, top_j = rows[k // len(outs)], outs[k % len(outs)]
        spent += sweep
        if top_i < 0:
            break
        moved = hists[top_j] - hists[top_i]
        mask[top_i], mask[top_j] = False, True
        train_sum, test_sum, best = train_sum + moved, test_sum - moved, top
    return mask


@dataclass
class SplitResult:
    train: DatasetIndex
    test: DatasetIndex
    divergence: float
    train_divergence: float
    test_divergence: float
    seed: int
    train_fraction: float
    city_counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "train_size": len(self.train),
            "test_size": len(self.test),
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "divergence": self.divergence,
            "train_divergence": self.train_divergence,
            "test_divergence": self.test_divergence,
            "per_city": self.city_counts,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def split_histograms(
    hists: np.ndarray,
    train_fraction: float,
    seed: int = 0,
    restarts: int | None = None,
    max_pairs: int = 2_000_000,
) -> np.ndarray:
    """Boolean train mask for a class-balanced split of per-entry class histograms.

    Entries are visited largest-first (seeded shuffle breaks ties) and each
    goes to the side whose post-assignment worst-case divergence is lower;
    pairwise swaps then polish the result. Extra attempts start from seeded
    random partitions and the lowest divergence wins, earliest on ties. By
    default the number of extra attempts shrinks with the swap cost.
    ``max_pairs`` bounds the swap candidates scored over the whole call, so
    large datasets get the greedy pass only; the result depends on inputs
    and seed alone.
    """
    hists = np.asarray(hists, dtype=np.float64)
    n = len(hists)
    n_train, n_test = split_sizes(n, train_fraction)
    sweep = n_train * n_test
    if restarts is None:
        restarts = min(16, max_pairs // (4 * sweep))
    total = hists.sum(axis=0)
    target = total / total.sum() if total.sum() > 0 else np.zeros_like(total)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    order = perm[np.argsort(-hists.sum(axis=1)[perm], kind="stable")]
    starts = [_greedy(hists, n_train, order, target)]
    for _ in range(restarts):
        mask = np.zeros(n, dtype=bool)
        mask[rng.permutation(n)[:n_train]] = True
        starts.append(mask)
    best_mask, best_score = None, math.inf
    for mask in starts:
        mask = _refine(hists, mask, target, max_pairs // len(starts))
        score = max(split_divergence(hists, mask))
        if score < best_score - 1e-12:
            best_mask, best_score = mask, score
    return best_mask


def stratified_split(
    index: DatasetIndex,
    train_fraction: float,
    seed: int = 0,
    jobs: int = 1,
    histograms: np.ndarray | None = None,
) -> SplitResult:
    """Split ``index`` so both sides keep the whole set's class-pixel distribution.

    Entries keep their manifest order within each side.
    """
    split_sizes(len(index), train_fraction)
    hist = label_histograms(index, jobs) if histograms is None else histograms
    hist = hist[:, : index.class_count]
    mask = split_histograms(hist, train_fraction, seed)
    d_train, d_test = split_divergence(hist, mask)
    positions = np.arange(len(index))
    train, test = index.subset(positions[mask]), index.subset(positions[~mask])
    cities = sorted({e.city or "" for e in index.entries})
    tr, te = train.city_counts(), test.city_counts()
    per_city = {
        c: {"train": tr.get(c, 0), "test": te.get(c, 0), "total": tr.get(c, 0) + te.get(c, 0)} for c in cities
    }
    return SplitResult(train, test, max(d_train, d_test), d_train, d_test, seed, train_fraction, per_city)
