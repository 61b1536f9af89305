# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pixel kernels. Same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline Py_ssize_t _locate(double v, const double[::1] edges, Py_ssize_t n_bins) noexcept nogil:
    # start from the equal-width guess, then walk to the bin with edges[g] <= v < edges[g+1];
    # exact for any edges, O(1) when they are uniform. Last bin is closed at the top edge.
    cdef Py_ssize_t g = <Py_ssize_t>(v * n_bins)
    if g > n_bins - 1:
        g = n_bins - 1
    if g < 0:
        g = 0
    while g > 0 and edges[g] > v:
        g -= 1
    while g < n_bins - 1 and edges[g + 1] <= v:
        g += 1
    return g


def bin_indices(const double[::1] values, const double[::1] edges):
    """Bin id per value; returns (ids, first_bad_index), -1 when all in range."""
    cdef Py_ssize_t n = values.shape[0], n_bins = edges.shape[0] - 1, i
    cdef Py_ssize_t bad = -1
    cdef double lo_edge = edges[0], hi_edge = edges[n_bins], v
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] ov = out
    with nogil:
        for i in range(n):
            v = values[i]
            if not (v >= lo_edge and v <= hi_edge):
                bad = i
                break
            ov[i] = _locate(v, edges, n_bins)
    return out, bad


def grouped_confusion(const cnp.uint8_t[::1] gt, const cnp.uint8_t[::1] pred,
                      const double[::1] exposure, const double[::1] edges,
                      Py_ssize_t class_count, cnp.int64_t[:, :, ::1] out,
                      int invalid):
    """Add one image into ``out[bin, gt, pred]``.

    Returns -1 on success, else the index of the first offending pixel;
    ``out`` is left untouched in that case.
    """
    cdef Py_ssize_t n = gt.shape[0], n_bins = edges.shape[0] - 1, i, g
    cdef Py_ssize_t bad = -1
    cdef int t, p
    cdef double v, lo_edge = edges[0], hi_edge = edges[n_bins]
    scratch = np.zeros((n_bins, class_count, class_count), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] acc = scratch
    with nogil:
        for i in range(n):
            t = gt[i]
            p = pred[i]
            v = exposure[i]
            if p >= class_count or not (v >= lo_edge and v <= hi_edge):
                bad = i
                break
            if t == invalid:
                continue
            if t >= class_count:
                bad = i
                break
            g = _locate(v, edges, n_bins)
            acc[g, t, p] += 1
    if bad >= 0:
        return bad
    with nogil:
        for g in range(n_bins):
            for t in range(class_count):
                for p in range(class_count):
                    out[g, t, p] += acc[g, t, p]
    return -1


def lut_counts(const cnp.uint8_t[:, ::1] rgb, const cnp.intp_t[::1] lut, Py_ssize_t n_bins):
    """Histogram of ``lut[max(r, g, b)]`` over an (N, 3) pixel array."""
    cdef Py_ssize_t n = rgb.shape[0], i
    cdef cnp.uint8_t m
    counts = np.zeros(n_bins, dtype=np.int64)
    cdef cnp.int64_t[::1] cv = counts
    with nogil:
        for i in range(n):
            m = rgb[i, 0]
            if rgb[i, 1] > m:
                m = rgb[i, 1]
            if rgb[i, 2] > m:
                m = rgb[i, 2]
            cv[lut[m]] += 1
    return counts
