"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``."""

import numpy as np

BACKEND = "python"


def _locate(values, edges):
    n_bins = edges.shape[0] - 1
    return np.minimum(np.searchsorted(edges, values, side="right") - 1, n_bins - 1)


def bin_indices(values, edges):
    values = np.asarray(values, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    bad = np.flatnonzero(~((values >= edges[0]) & (values <= edges[-1])))
    if bad.size:
        return np.empty(values.shape[0], dtype=np.intp), int(bad[0])
    return _locate(values, edges).astype(np.intp), -1


def grouped_confusion(gt, pred, exposure, edges, class_count, out, invalid):
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    exposure = np.asarray(exposure, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    n_bins = edges.shape[0] - 1
    valid = gt != invalid
    bad_mask = (pred >= class_count) | ~((exposure >= edges[0]) & (exposure <= edges[-1]))
    bad_mask |= valid & (gt >= class_count)
    bad = np.flatnonzero(bad_mask)
    if bad.size:
        return int(bad[0])
    g = _locate(exposure[valid], edges)
    flat = (g * class_count + gt[valid].astype(np.intp)) * class_count + pred[valid].astype(np.intp)
    counts = np.bincount(flat, minlength=n_bins * class_count * class_count)
    out += counts.reshape(n_bins, class_count, class_count)
    return -1


def lut_counts(rgb, lut, n_bins):
    peak = np.asarray(rgb).max(axis=1)
    return np.bincount(np.asarray(lut)[peak], minlength=n_bins).astype(np.int64)
