"""Synthetic on-disk datasets for CLI tests."""

import numpy as np

from exposure_eval.exposure import encode_rgb_png
from exposure_eval.labels import INVALID, LabelMap, encode_label_png


def write_label(path, arr, class_count=19):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_label_png(LabelMap(np.asarray(arr, np.uint8), class_count)))


def write_image(path, arr):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_rgb_png(np.asarray(arr, np.uint8)))


def synthetic_eval_set(root, n=50, size=(12, 16), class_count=19, seed=0, invalid_rate=0.1):
    rng = np.random.default_rng(seed)
    h, w = size
    for i in range(n):
        stem = f"frame_{i:04d}"
        gt = rng.integers(0, class_count, (h, w))
        gt[rng.random((h, w)) < invalid_rate] = INVALID
        pred = np.where(rng.random((h, w)) < 0.7, np.where(gt == INVALID, 0, gt), rng.integers(0, class_count, (h, w)))
        write_label(root / "gt" / f"{stem}.png", gt, class_count)
        write_label(root / "pred" / f"{stem}.png", pred, class_count)
        write_image(root / "images" / f"{stem}.png", rng.integers(0, 256, (h, w, 3)))
    return root
