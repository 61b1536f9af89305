"""Compare the compiled and numpy kernels on full-resolution frames.

    python benchmarks/bench_kernels.py [--images 20] [--classes 19]
"""

import argparse
import time

import numpy as np

from exposure_eval import _backend
from exposure_eval.exposure import ExposureBins, value_lut

H, W = 512, 1024


def bench(mod, frames, class_count, edges, lut, repeat):
    best_conf = best_hist = float("inf")
    result = None
    for _ in range(repeat):
        out = np.zeros((len(edges) - 1, class_count, class_count), np.int64)
        t = time.perf_counter()
        for gt, pred, exp, _ in frames:
            assert mod.grouped_confusion(gt, pred, exp, edges, class_count, out, 255) == -1
        best_conf = min(best_conf, time.perf_counter() - t)
        t = time.perf_counter()
        for *_, rgb in frames:
            mod.lut_counts(rgb, lut, len(edges) - 1)
        best_hist = min(best_hist, time.perf_counter() - t)
        result = out
    return best_conf, best_hist, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", type=int, default=20)
    ap.add_argument("--classes", type=int, default=19)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    bins = ExposureBins()
    frames = []
    for _ in range(args.images):
        gt = rng.integers(0, args.classes, H * W).astype(np.uint8)
        gt[rng.random(H * W) < 0.07] = 255
        pred = rng.integers(0, args.classes, H * W).astype(np.uint8)
        rgb = rng.integers(0, 256, (H * W, 3)).astype(np.uint8)
        exp = rgb.max(axis=1) / 255.0
        frames.append((gt, pred, exp, rgb))
    lut = value_lut(bins)

    results = {}
    print(f"{args.images} frames of {W}x{H}, {args.classes} classes, best of {args.repeat}")
    print(f"{'backend':>8}  {'confusion ms/img':>17}  {'histogram ms/img':>17}")
    for name in _backend.available():
        conf, hist, out = bench(_backend.load(name), frames, args.classes, bins.edges, lut, args.repeat)
        results[name] = (conf, hist, out)
        print(f"{name:>8}  {1e3 * conf / args.images:17.2f}  {1e3 * hist / args.images:17.2f}")
    if len(results) == 2:
        assert np.array_equal(results["python"][2], results["cython"][2]), "backends disagree"
        print(f"speed-up: confusion x{results['python'][0] / results['cython'][0]:.1f}, "
              f"histogram x{results['python'][1] / results['cython'][1]:.1f}")


if __name__ == "__main__":
    main()
