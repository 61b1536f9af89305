"""Label maps and the single-channel 8-bit PNG codec."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DomainError, LabelFormatError

INVALID = 255
DEFAULT_CLASS_COUNT = 19


@dataclass(frozen=True)
class LabelMap:
    """H x W class ids in ``[0, class_count)`` or ``INVALID``."""

    labels: np.ndarray
    class_count: int = DEFAULT_CLASS_COUNT

    def __post_init__(self):
        if not 1 <= int(self.class_count) <= INVALID:
            raise DomainError(f"class_count must be in [1, {INVALID}], got {self.class_count}")
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or 0 in arr.shape:
            raise LabelFormatError(f"label map must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > INVALID):
                raise LabelFormatError("label ids must fit in 8 bits")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        bad = (arr >= self.class_count) & (arr != INVALID)
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise LabelFormatError(
                f"label {arr[y, x]} at (x={x}, y={y}) is >= class_count {self.class_count} and not {INVALID}"
            )
        object.__setattr__(self, "labels", arr)
        object.__setattr__(self, "class_count", int(self.class_count))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.class_count == other.class_count and np.array_equal(self.labels, other.labels)

    __hash__ = None

    def invalid_fraction(self) -> float:
        return float(np.count_nonzero(self.labels == INVALID)) / self.labels.size


def decode_label_png(data: bytes, class_count: int = DEFAULT_CLASS_COUNT, name: str = "<bytes>") -> LabelMap:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise LabelFormatError(f"{name}: not a decodable PNG ({exc})") from exc
    if img.format != "PNG":
        raise LabelFormatError(f"{name}: expected PNG, got {img.format}")
    # "P" keeps raw palette indices, which is how many label PNGs are stored
    if img.mode not in ("L", "P"):
        raise LabelFormatError(f"{name}: expected single-channel 8-bit PNG, got mode {img.mode}")
    try:
        return LabelMap(np.asarray(img, dtype=np.uint8), class_count)
    except LabelFormatError as exc:
        raise LabelFormatError(f"{name}: {exc}") from exc


def encode_label_png(label_map: LabelMap) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(label_map.labels, "L").save(buf, format="PNG")
    return buf.getvalue()


def read_label_png(path, class_count: int = DEFAULT_CLASS_COUNT) -> LabelMap:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise LabelFormatError(f"{path}: cannot read ({exc})") from exc
    return decode_label_png(data, class_count, name=str(path))


def resize_labels(label_map: LabelMap, new_w: int, new_h: int) -> LabelMap:
    """Nearest-neighbour resample: output pixel (x, y) reads source (x*W//w, y*H//h)."""
    if new_w <= 0 or new_h <= 0:
        raise DomainError(f"target size must be positive, got {new_w}x{new_h}")
    h, w = label_map.shape
    if (new_w, new_h) == (w, h):
        return label_map
    rows = (np.arange(new_h) * h) // new_h
    cols = (np.arange(new_w) * w) // new_w
    return LabelMap(label_map.labels[rows[:, None], cols[None, :]], label_map.class_count)


def read_class_names(path) -> list[str]:
    """One class name per non-blank line; line order defines the id."""
    names = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not names:
        raise DomainError(f"{path}: no class names")
    if len(names) >= INVALID:
        raise DomainError(f"{path}: at most {INVALID - 1} classes are supported")
    return names
