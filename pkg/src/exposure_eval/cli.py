"""``exposure-eval`` command line.

Every command computes all of its outputs in memory, stages them in a
temporary directory next to the destination and renames them into place,
so a failed run leaves no partial files. One JSON summary line goes to
stdout; logs go to stderr (level from ``EXPOSURE_EVAL_LOG``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from ._parallel import parallel_map
from .annotation import DisagreementStats, disagreement_stats, merge_annotations
from .errors import ConfigError, ExposureEvalError, GradientCheckError, LabelFormatError, ShapeError
from .exposure import ExposureBins, HistogramAccumulator, exposure_map, histogram_csv, image_bin_counts, read_rgb_png
from .gradcheck import run_gradcheck
from .labels import DEFAULT_CLASS_COUNT, INVALID, encode_label_png, read_class_names, read_label_png, resize_labels
from .metrics import MACRO, MICRO, GroupedConfusion, accumulate, evaluate
from .stats import (
    SCHEMA_VERSION,
    class_distribution,
    invalid_ratio,
    label_histograms,
    read_manifest,
    stratified_split,
)
from .svg import bar_chart

log = logging.getLogger("exposure_eval")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _dump(obj) -> bytes:
    return (json.dumps({"schema_version": SCHEMA_VERSION, **obj}, indent=2, sort_keys=True) + "\n").encode()


def write_outputs(out_dir: Path, files: dict[str, bytes]) -> list[str]:
    """Stage ``files`` (relative path -> bytes) and move them into ``out_dir`` atomically per file."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out_dir))
    try:
        for rel, data in files.items():
            tmp = stage / rel
            tmp.parent.mkdir(parents=True, exist_ok=True)
            tmp.write_bytes(data)
        for rel in files:
            dest = out_dir / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(stage / rel, dest)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return sorted(str(out_dir / rel) for rel in files)


def _existing_dir(path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise ConfigError(f"{p}: directory not found")
    return p


def _existing_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: file not found")
    return p


def _pngs(directory: Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(directory.iterdir()) if p.suffix.lower() == ".png"}


def _find_image(directory: Path, stem: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        p = directory / f"{stem}{suffix}"
        if p.is_file():
            return p
    raise ConfigError(f"{directory}: no image for {stem!r}")


def _classes(args) -> tuple[int, list[str] | None]:
    if args.classes:
        names = read_class_names(_existing_file(args.classes))
        return len(names), names
    return DEFAULT_CLASS_COUNT, None


def _bins(args) -> ExposureBins:
    return ExposureBins(args.bins)


# ---------------------------------------------------------------- commands


def cmd_exposure(args) -> dict:
    bins = _bins(args)
    if args.manifest:
        index = read_manifest(_existing_file(args.manifest))
        paths = [index.resolve(e.image) for e in index.entries]
    else:
        directory = _existing_dir(args.images)
        paths = [p for p in sorted(directory.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES]
    if not paths:
        raise ConfigError("no images to analyse")
    for p in paths:
        _existing_file(p)

    def one(path):
        img = read_rgb_png(path)
        return image_bin_counts(img, bins), (img.height, img.width)

    acc = HistogramAccumulator(bins)
    for counts, shape in parallel_map(one, paths, args.jobs):
        acc.add_counts(counts, shape)
    avg = acc.average()
    files = {"exposure_histogram.csv": histogram_csv(avg, bins).encode()}
    if args.plot:
        svg = bar_chart(bins.labels(), list(avg), "Average pixels per image by exposure", "pixels")
        files["exposure_histogram.svg"] = svg.encode()
    outputs = write_outputs(Path(args.out), files)
    return {"images": acc.image_count, "outputs": outputs}


def _eval_pairs(args) -> list[tuple[str, Path, Path, Path]]:
    pred_dir = _existing_dir(args.pred)
    if args.manifest:
        index = read_manifest(_existing_file(args.manifest))
        triples = [(e.stem, index.resolve(e.image), index.resolve(e.label)) for e in index.entries]
    else:
        if not (args.gt and args.images):
            raise ConfigError("eval needs --gt and --images, or --manifest")
        gt_dir, img_dir = _existing_dir(args.gt), _existing_dir(args.images)
        triples = [(stem, _find_image(img_dir, stem), p) for stem, p in _pngs(gt_dir).items()]
    if not triples:
        raise ConfigError("no ground-truth label files found")
    pairs = []
    for stem, image, label in sorted(triples):
        pred = pred_dir / f"{stem}.png"
        for p in (image, label, pred):
            _existing_file(p)
        pairs.append((stem, image, label, pred))
    return pairs


def cmd_eval(args) -> dict:
    class_count, names = _classes(args)
    bins = _bins(args)
    pairs = _eval_pairs(args)

    def one(item):
        stem, image, label, pred_path = item
        gt = read_label_png(label, class_count)
        pred = read_label_png(pred_path, class_count)
        if pred.shape != gt.shape:
            pred = resize_labels(pred, gt.width, gt.height)
        exp = exposure_map(read_rgb_png(image))
        if exp.values.shape != gt.shape:
            raise ShapeError(f"{image}: size {exp.values.shape[::-1]} differs from label {gt.shape[::-1]}")
        try:
            return accumulate(gt, pred, exp, GroupedConfusion(class_count, bins))
        except LabelFormatError as exc:
            raise LabelFormatError(f"{pred_path}: {exc}") from exc

    acc = GroupedConfusion(class_count, bins)
    for part in parallel_map(one, pairs, args.jobs):
        acc = acc + part
    report = evaluate(acc, beta=args.beta, averaging=args.averaging, class_names=names)
    files = {"report.json": report.to_json().encode(), "ef1_per_group.csv": report.ef1_csv().encode()}
    if args.plot:
        files["ef1_per_group.svg"] = bar_chart(bins.labels(), report.ef1_per_group, "EF1 by exposure group", "EF1").encode()
    outputs = write_outputs(Path(args.out), files)
    return {"images": len(pairs), "miou": report.miou, "mef1": report.mef1, "outputs": outputs}


def _read_overrides(path: Path | None) -> dict[str, dict[tuple[int, int], int]]:
    out: dict[str, dict[tuple[int, int], int]] = {}
    if path is None:
        return out
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.setdefault(str(obj["image"]), {})[(int(obj["x"]), int(obj["y"]))] = int(obj["label"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad override record ({exc})") from exc
    return out


def cmd_merge(args) -> dict:
    class_count, names = _classes(args)
    a_dir, b_dir = _existing_dir(args.a), _existing_dir(args.b)
    overrides = _read_overrides(_existing_file(args.overrides) if args.overrides else None)
    a_files = _pngs(a_dir)
    if not a_files:
        raise ConfigError(f"{a_dir}: no label PNGs")
    stems = sorted(a_files)
    for stem in stems:
        _existing_file(b_dir / f"{stem}.png")
    unknown = sorted(set(overrides) - set(stems))
    if unknown:
        raise ConfigError(f"overrides name unknown images: {', '.join(unknown)}")

    def one(stem):
        a = read_label_png(a_files[stem], class_count)
        b = read_label_png(b_dir / f"{stem}.png", class_count)
        try:
            merged, decisions = merge_annotations(a, b, overrides.get(stem))
        except ShapeError as exc:
            raise ShapeError(f"{stem}: {exc}") from exc
        return merged, decisions, disagreement_stats(a, b, merged)

    files: dict[str, bytes] = {}
    log_lines: list[str] = []
    total = DisagreementStats()
    invalid = pixels = 0
    for stem, (merged, decisions, st) in zip(stems, parallel_map(one, stems, args.jobs)):
        files[f"labels/{stem}.png"] = encode_label_png(merged)
        log_lines.extend(d.to_json(stem) for d in decisions)
        total = total + st
        invalid += int(np.count_nonzero(merged.labels == INVALID))
        pixels += merged.labels.size
    files["decisions.jsonl"] = "".join(line + "\n" for line in log_lines).encode()
    summary = total.to_dict(names)
    summary["invalid_ratio"] = invalid / pixels
    summary["images"] = len(stems)
    files["disagreement.json"] = _dump(summary)
    outputs = write_outputs(Path(args.out), files)
    return {"images": len(stems), "decisions": len(log_lines), "outputs": outputs}


def cmd_stats(args) -> dict:
    class_count, names = _classes(args)
    index = read_manifest(_existing_file(args.manifest), class_count)
    if not index.entries:
        raise ConfigError(f"{args.manifest}: manifest is empty")
    hists = label_histograms(index, args.jobs)
    dist = class_distribution(index, histograms=hists)
    ratio = invalid_ratio(index, histograms=hists)

    def key(c):
        return names[c] if names else str(c)

    body = {
        "images": len(index),
        "class_count": class_count,
        "per_class_pixels": {key(c): n for c, n in dist.per_class_pixels.items()},
        "log_scale_view": {key(c): v for c, v in dist.log_scale_view.items()},
        "invalid_pixels": dist.invalid_pixels,
        "total_pixels": dist.total_pixels,
        "invalid_ratio": ratio,
        "per_city": index.city_counts(),
    }
    files = {"stats.json": _dump(body)}
    if args.plot:
        labels = [key(c) for c in range(class_count)]
        values = [dist.per_class_pixels.get(c, 0) for c in range(class_count)]
        files["class_distribution.svg"] = bar_chart(
            labels, values, "Labelled pixels per class", "log10(pixels)", log_scale=True
        ).encode()
    outputs = write_outputs(Path(args.out), files)
    return {"images": len(index), "invalid_ratio": ratio, "outputs": outputs}


def cmd_split(args) -> dict:
    class_count, _ = _classes(args)
    index = read_manifest(_existing_file(args.manifest), class_count)
    result = stratified_split(index, args.train_fraction, seed=args.seed, jobs=args.jobs)
    files = {
        "train.txt": result.train.to_manifest().encode(),
        "test.txt": result.test.to_manifest().encode(),
        "split.json": result.summary_json().encode(),
    }
    outputs = write_outputs(Path(args.out), files)
    return {"train": len(result.train), "test": len(result.test), "divergence": result.divergence, "outputs": outputs}


def cmd_egl_check(args) -> dict:
    report = run_gradcheck(
        instances=args.instances,
        seed=args.seed,
        max_batch=args.max_batch,
        max_channels=args.max_channels,
        max_spatial=args.max_spatial,
        step=args.step,
        tolerance=args.tolerance,
    )
    for line in report.lines():
        print(line)
    summary = {"instances": report.instances, "max_rel_error": report.max_error, "tolerance": report.tolerance}
    if not report.passed:
        raise GradientCheckError(json.dumps(summary, sort_keys=True))
    return summary


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exposure-eval",
        description="Exposure-aware segmentation evaluation and dataset tooling.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=1, help="worker threads for per-file work (default 1)")
    common.add_argument("--out", required=True, help="output directory")

    classes = argparse.ArgumentParser(add_help=False)
    classes.add_argument("--classes", help="file with one class name per line (default: 19 unnamed classes)")

    bins = argparse.ArgumentParser(add_help=False)
    bins.add_argument("--bins", type=int, default=10, help="number of equal-width exposure bins (default 10)")
    bins.add_argument("--plot", action="store_true", help="also write an SVG bar chart")

    p = sub.add_parser("exposure", parents=[common, bins], help="average per-image exposure histogram")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--images", help="directory of RGB images")
    src.add_argument("--manifest", help="dataset manifest; its image column is used")
    p.set_defaults(func=cmd_exposure)

    p = sub.add_parser("eval", parents=[common, classes, bins], help="mIoU and exposure-grouped EF1")
    p.add_argument("--gt", help="directory of ground-truth label PNGs")
    p.add_argument("--images", help="directory of RGB images matching --gt by stem")
    p.add_argument("--manifest", help="manifest of image/label pairs (replaces --gt/--images)")
    p.add_argument("--pred", required=True, help="directory of predicted label PNGs, matched by stem")
    p.add_argument("--averaging", choices=(MACRO, MICRO), default=MACRO)
    p.add_argument("--beta", type=float, default=1.0, help="F-score beta (default 1)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("merge", parents=[common, classes], help="merge two annotations with reviewer overrides")
    p.add_argument("--a", required=True, help="directory of annotator A label PNGs")
    p.add_argument("--b", required=True, help="directory of annotator B label PNGs")
    p.add_argument("--overrides", help='JSON lines {"image": stem, "x": .., "y": .., "label": ..}')
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("stats", parents=[common, classes], help="class distribution and invalid ratio")
    p.add_argument("--manifest", required=True)
    p.add_argument("--plot", action="store_true", help="also write an SVG of the class distribution")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", parents=[common, classes], help="class-balanced train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("egl-check", help="finite-difference check of the guidance-layer gradients")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-batch", type=int, default=2)
    p.add_argument("--max-channels", type=int, default=8)
    p.add_argument("--max-spatial", type=int, default=8)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_egl_check)
    return parser


def _setup_logging():
    level = os.environ.get("EXPOSURE_EVAL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    record = {"command": args.command}
    try:
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be at least 1")
        result = args.func(args)
    except ExposureEvalError as exc:
        log.error("%s", exc)
        record.update(status="error", code=exc.exit_code, error=type(exc).__name__, message=str(exc))
        print(json.dumps(record, sort_keys=True))
        return exc.exit_code
    record.update(status="ok", **result)
    print(json.dumps(record, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
