import numpy as np
import pytest

from exposure_eval import _backend, _kernels_py

needs_ext = pytest.mark.skipif("cython" not in _backend.available(), reason="compiled kernels not built")


@needs_ext
def test_grouped_confusion_backends_agree(rng):
    from exposure_eval import _kernels

    edges = np.array([g / 10 for g in range(11)])
    for _ in range(50):
        n = int(rng.integers(1, 400))
        c = int(rng.integers(1, 20))
        gt = rng.integers(0, c, n).astype(np.uint8)
        gt[rng.random(n) < 0.2] = 255
        pred = rng.integers(0, c, n).astype(np.uint8)
        exp = rng.integers(0, 256, n) / 255.0
        a = np.zeros((10, c, c), np.int64)
        b = np.zeros((10, c, c), np.int64)
        assert _kernels.grouped_confusion(gt, pred, exp, edges, c, a, 255) == -1
        assert _kernels_py.grouped_confusion(gt, pred, exp, edges, c, b, 255) == -1
        np.testing.assert_array_equal(a, b)


@needs_ext
def test_bin_indices_backends_agree_on_edges():
    from exposure_eval import _kernels

    edges = np.array([g / 10 for g in range(11)])
    values = np.concatenate([edges, np.nextafter(edges, -1)[1:], np.nextafter(edges, 2)[:-1], np.arange(256) / 255])
    a, bad_a = _kernels.bin_indices(values, edges)
    b, bad_b = _kernels_py.bin_indices(values, edges)
    assert bad_a == bad_b == -1
    np.testing.assert_array_equal(a, b)


@needs_ext
def test_lut_counts_backends_agree(rng):
    from exposure_eval import _kernels

    rgb = rng.integers(0, 256, (1000, 3)).astype(np.uint8)
    lut = (np.arange(256) * 10 // 256).astype(np.intp)
    np.testing.assert_array_equal(_kernels.lut_counts(rgb, lut, 10), _kernels_py.lut_counts(rgb, lut, 10))


@pytest.mark.parametrize("name", _backend.available())
def test_error_index_reports_first_bad_pixel(name):
    mod = _backend.load(name)
    edges = np.array([0.0, 0.5, 1.0])
    gt = np.array([0, 1, 0, 1], np.uint8)
    pred = np.array([0, 1, 255, 1], np.uint8)
    out = np.zeros((2, 2, 2), np.int64)
    assert mod.grouped_confusion(gt, pred, np.full(4, 0.2), edges, 2, out, 255) == 2
    assert not out.any()
    assert mod.grouped_confusion(gt, np.zeros(4, np.uint8), np.array([0.1, 1.5, 0.1, 0.1]), edges, 2, out, 255) == 1
    _, bad = mod.bin_indices(np.array([0.2, -0.1]), edges)
    assert bad == 1


def test_forced_python_backend(monkeypatch):
    monkeypatch.setenv("EXPOSURE_EVAL_BACKEND", "python")
    assert _backend.load().BACKEND == "python"


@needs_ext
def test_nonuniform_edges_backends_agree(rng):
    from exposure_eval import _kernels

    edges = np.array([0.0, 0.05, 0.3, 0.31, 0.9, 1.0])
    values = np.concatenate([edges, np.nextafter(edges[1:], -1), np.nextafter(edges[:-1], 2), rng.random(2000)])
    a, _ = _kernels.bin_indices(values, edges)
    b, _ = _kernels_py.bin_indices(values, edges)
    np.testing.assert_array_equal(a, b)
    assert np.all((edges[a] <= values) & ((values < edges[a + 1]) | (values == 1.0)))
