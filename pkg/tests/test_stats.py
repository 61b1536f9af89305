import itertools
import math

import numpy as np
import pytest

from exposure_eval.errors import ConfigError, DomainError, LabelFormatError
from exposure_eval.labels import INVALID, LabelMap, encode_label_png
from exposure_eval.stats import (
    class_distribution,
    invalid_ratio,
    parse_manifest,
    read_manifest,
    split_divergence,
    split_histograms,
    split_sizes,
    stratified_split,
)


def write_dataset(root, maps, cities=None, class_count=3):
    (root / "labels").mkdir(exist_ok=True)
    lines = []
    for i, arr in enumerate(maps):
        name = f"img{i:03d}.png"
        lm = LabelMap(np.asarray(arr, np.uint8), class_count)
        (root / "labels" / name).write_bytes(encode_label_png(lm))
        city = cities[i] if cities else None
        lines.append("\t".join([f"images/{name}", f"labels/{name}"] + ([city] if city else [])))
    (root / "manifest.tsv").write_text("\n".join(lines) + "\n")
    return read_manifest(root / "manifest.tsv", class_count)


def test_single_map_all_zero(tmp_path):
    index = write_dataset(tmp_path, [[[0, 0], [0, 0]]])
    assert class_distribution(index).per_class_pixels == {0: 4}


def test_invalid_excluded_from_distribution(tmp_path):
    index = write_dataset(tmp_path, [[[0, 1], [INVALID, 1]]])
    dist = class_distribution(index)
    assert dist.per_class_pixels == {0: 1, 1: 2}
    assert dist.invalid_pixels == 1
    assert dist.log_scale_view == {0: 0.0, 1: math.log10(2)}


def test_distribution_is_additive(tmp_path, rng):
    maps = [rng.integers(0, 3, (3, 4)) for _ in range(2)]
    both = write_dataset(tmp_path, maps)
    d0 = class_distribution(both.subset([0]))
    d1 = class_distribution(both.subset([1]))
    assert (d0 + d1).per_class_pixels == class_distribution(both).per_class_pixels


@pytest.mark.parametrize(
    "arr, expected", [([[0, 1], [2, 1]], 0.0), ([[INVALID] * 2] * 2, 1.0), ([[0, INVALID], [INVALID, 1]], 0.5)]
)
def test_invalid_ratio(tmp_path, arr, expected):
    assert invalid_ratio(write_dataset(tmp_path, [arr])) == expected


def test_undecodable_file_is_named(tmp_path):
    index = write_dataset(tmp_path, [[[0]]])
    (tmp_path / "labels" / "img000.png").write_bytes(b"junk")
    with pytest.raises(LabelFormatError, match="img000.png"):
        class_distribution(index)


def test_missing_file(tmp_path):
    index = write_dataset(tmp_path, [[[0]]])
    (tmp_path / "labels" / "img000.png").unlink()
    with pytest.raises(ConfigError, match="not found"):
        invalid_ratio(index)


def test_manifest_parsing():
    idx = parse_manifest("a/x.png\tb/x.png\tberlin\n\n# note\na/y.jpg\tb/y.png\n")
    assert [(e.stem, e.city) for e in idx.entries] == [("x", "berlin"), ("y", None)]
    with pytest.raises(ConfigError, match="stems differ"):
        parse_manifest("a/x.png\tb/z.png\n")
    with pytest.raises(ConfigError, match="columns"):
        parse_manifest("only-one-column\n")


def test_split_sizes():
    assert split_sizes(4297, 0.6977) == (2998, 1299)
    assert split_sizes(4297, 0.6978) == (2998, 1299)
    assert split_sizes(2, 0.5) == (1, 1)
    for bad in [(1, 0.5), (2, 0.0), (2, 1.0), (3, 0.1)]:
        with pytest.raises(DomainError):
            split_sizes(*bad)


def test_two_identical_entries():
    mask = split_histograms(np.array([[3, 1], [3, 1]]), 0.5, seed=0)
    assert mask.sum() == 1
    assert max(split_divergence(np.array([[3, 1], [3, 1]]), mask)) == 0.0


def test_split_is_deterministic_partition(tmp_path, rng):
    maps = [rng.integers(0, 3, (4, 4)) for _ in range(12)]
    cities = ["berlin", "tokyo", "lagos"] * 4
    index = write_dataset(tmp_path, maps, cities)
    a = stratified_split(index, 0.7, seed=3)
    b = stratified_split(index, 0.7, seed=3)
    assert a.train.to_manifest() == b.train.to_manifest()
    assert a.test.to_manifest() == b.test.to_manifest()
    assert a.summary_json() == b.summary_json()
    assert (len(a.train), len(a.test)) == (8, 4)
    train, test = set(a.train.entries), set(a.test.entries)
    assert not train & test and train | test == set(index.entries)
    total = class_distribution(index).per_class_pixels
    assert (class_distribution(a.train) + class_distribution(a.test)).per_class_pixels == total
    assert sum(v["total"] for v in a.city_counts.values()) == 12


def exhaustive_best(h, n_train):
    n = len(h)
    return min(
        max(split_divergence(h, np.isin(np.arange(n), combo))) for combo in itertools.combinations(range(n), n_train)
    )


def test_greedy_within_twice_optimum_small(rng):
    for trial in range(150):
        n = int(rng.integers(2, 7))
        h = rng.integers(0, 20, (n, int(rng.integers(1, 5))))
        frac = float(rng.uniform(0.2, 0.8))
        try:
            n_train, _ = split_sizes(n, frac)
        except DomainError:
            continue
        got = max(split_divergence(h, split_histograms(h, frac, seed=trial)))
        assert got <= 2 * exhaustive_best(h, n_train) + 1e-12


def test_large_split_sizes():
    h = np.random.default_rng(0).poisson(40, (4297, 19))
    mask = split_histograms(h, 0.6977, seed=0)
    assert (mask.sum(), (~mask).sum()) == (2998, 1299)
