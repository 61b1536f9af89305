"""Exposure maps from RGB images and equal-width exposure binning.

Exposure is the HSV value channel, ``max(R, G, B) / 255``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from ._backend import kernels
from .errors import DomainError, LabelFormatError, ShapeError


@dataclass(frozen=True)
class RgbImage:
    """H x W x 3 grid of 8-bit pixels."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels)
        if px.dtype != np.uint8:
            raise ShapeError(f"RGB pixels must be uint8, got {px.dtype}")
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] == 0 or px.shape[1] == 0:
            raise ShapeError(f"expected a non-empty (H, W, 3) array, got shape {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class ExposureMap:
    """H x W grid of exposure values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or 0 in v.shape:
            raise ShapeError(f"expected a non-empty (H, W) array, got shape {v.shape}")
        if not np.all((v >= 0.0) & (v <= 1.0)):
            raise DomainError("exposure values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ExposureBins:
    """Edges ``0 = e_0 < ... < e_G = 1``; bins are ``[e_g, e_{g+1})`` with the last one closed."""

    bin_count: int = 10
    edges: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.edges is None:
            if int(self.bin_count) < 1:
                raise DomainError(f"bin_count must be positive, got {self.bin_count}")
            # g / G rather than linspace: keeps 0.3, 0.7 ... as their nearest doubles
            edges = np.array([g / self.bin_count for g in range(self.bin_count + 1)])
        else:
            edges = np.asarray(self.edges, dtype=np.float64).copy()
            if edges.ndim != 1 or edges.size < 2:
                raise DomainError("edges need at least two entries")
            if edges.size - 1 != self.bin_count:
                raise DomainError(f"{edges.size} edges do not describe {self.bin_count} bins")
            if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
                raise DomainError("edges must increase strictly from 0 to 1")
        edges.setflags(write=False)
        object.__setattr__(self, "bin_count", int(self.bin_count))
        object.__setattr__(self, "edges", edges)

    def __eq__(self, other):
        if not isinstance(other, ExposureBins):
            return NotImplemented
        return self.bin_count == other.bin_count and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash(self.edges.tobytes())

    def labels(self) -> list[str]:
        return [f"{lo:g}-{hi:g}" for lo, hi in zip(self.edges[:-1], self.edges[1:])]


def as_rgb(image) -> RgbImage:
    return image if isinstance(image, RgbImage) else RgbImage(np.asarray(image))


def exposure_map(image) -> ExposureMap:
    rgb = as_rgb(image)
    return ExposureMap(rgb.pixels.max(axis=2) / 255.0)


def bin_index(value: float, bins: ExposureBins | None = None) -> int:
    bins = bins or ExposureBins()
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"exposure value {value!r} outside [0, 1]")
    ids, _ = kernels.bin_indices(np.array([value]), bins.edges)
    return int(ids[0])


def bin_map(values, bins: ExposureBins | None = None) -> np.ndarray:
    """Vectorised ``bin_index`` over an array, preserving its shape."""
    bins = bins or ExposureBins()
    arr = np.asarray(values, dtype=np.float64)
    ids, bad = kernels.bin_indices(np.ascontiguousarray(arr.ravel()), bins.edges)
    if bad >= 0:
        raise DomainError(f"exposure value {arr.ravel()[bad]!r} outside [0, 1]")
    return ids.reshape(arr.shape)


def value_lut(bins: ExposureBins) -> np.ndarray:
    """Bin id for each 8-bit channel maximum 0..255."""
    return np.ascontiguousarray(bin_map(np.arange(256) / 255.0, bins), dtype=np.intp)


def image_bin_counts(image, bins: ExposureBins | None = None) -> np.ndarray:
    """Pixel count per exposure bin for one image (sums to width * height)."""
    bins = bins or ExposureBins()
    rgb = as_rgb(image)
    flat = rgb.pixels.reshape(-1, 3)
    return kernels.lut_counts(flat, value_lut(bins), bins.bin_count)


class HistogramAccumulator:
    """Mergeable per-bin pixel totals; merging is plain integer addition."""

    def __init__(self, bins: ExposureBins | None = None):
        self.bins = bins or ExposureBins()
        self.counts = np.zeros(self.bins.bin_count, dtype=np.int64)
        self.image_count = 0
        self.shape: tuple[int, int] | None = None

    def add_counts(self, counts, shape):
        if self.shape is not None and shape != self.shape:
            raise ShapeError(f"image of size {shape} does not match earlier size {self.shape}")
        self.shape = shape
        self.counts += counts
        self.image_count += 1
        return self

    def add(self, image):
        rgb = as_rgb(image)
        return self.add_counts(image_bin_counts(rgb, self.bins), (rgb.height, rgb.width))

    def merge(self, other: "HistogramAccumulator") -> "HistogramAccumulator":
        if other.bins != self.bins:
            raise ShapeError("cannot merge histograms with different bins")
        out = HistogramAccumulator(self.bins)
        if self.shape and other.shape and self.shape != other.shape:
            raise ShapeError(f"image sizes differ: {self.shape} vs {other.shape}")
        out.shape = self.shape or other.shape
        out.counts = self.counts + other.counts
        out.image_count = self.image_count + other.image_count
        return out

    def average(self) -> np.ndarray:
        if self.image_count == 0:
            raise ShapeError("histogram needs at least one image")
        return self.counts / self.image_count


def exposure_histogram(images: Iterable, bins: ExposureBins | None = None) -> np.ndarray:
    """Average number of pixels per image falling in each exposure bin."""
    acc = HistogramAccumulator(bins)
    for image in images:
        acc.add(image)
    return acc.average()


def histogram_csv(avg: Sequence[float], bins: ExposureBins) -> str:
    lines = ["bin_low,bin_high,avg_pixels"]
    for lo, hi, v in zip(bins.edges[:-1], bins.edges[1:], avg):
        lines.append(f"{float(lo)!r},{float(hi)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


def decode_rgb_png(data: bytes, name: str = "<bytes>") -> RgbImage:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:  # Pillow raises a zoo of types
        raise LabelFormatError(f"{name}: cannot decode image ({exc})") from exc
    if img.mode in ("I;16", "I;16B", "I", "F"):
        raise LabelFormatError(f"{name}: expected 8-bit RGB, got mode {img.mode}")
    if img.mode != "RGB":
        img = img.convert("RGB")
    return RgbImage(np.asarray(img, dtype=np.uint8))


def read_rgb_png(path) -> RgbImage:
    path = Path(path)
    return decode_rgb_png(path.read_bytes(), str(path))


def encode_rgb_png(image) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(as_rgb(image).pixels, "RGB").save(buf, format="PNG")
    return buf.getvalue()
