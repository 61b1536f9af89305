import itertools

import numpy as np
import pytest

from exposure_eval.annotation import AGREE, DISCUSSION, MAJORITY, disagreement_stats, merge_annotations
from exposure_eval.errors import LabelFormatError, ShapeError
from exposure_eval.labels import INVALID, LabelMap

from oracles import reference_rule

ROAD, BUILDING, SKY = 0, 1, 2


def lm(values, c=3):
    return LabelMap(np.array(values, np.uint8).reshape(1, -1), c)


def test_agreement_kept():
    merged, decisions = merge_annotations(lm([ROAD]), lm([ROAD]))
    assert merged.labels.tolist() == [[ROAD]]
    assert decisions == []


def test_majority_win():
    merged, (d,) = merge_annotations(lm([BUILDING]), lm([SKY]), {0: SKY})
    assert merged.labels[0, 0] == SKY
    assert d.resolution == MAJORITY
    assert (d.a_label, d.b_label, d.final_label) == (BUILDING, SKY, SKY)


def test_two_invalid_votes():
    merged, _ = merge_annotations(lm([INVALID]), lm([INVALID]))
    assert merged.labels[0, 0] == INVALID


def test_unresolved_disagreement_is_pending():
    merged, (d,) = merge_annotations(lm([ROAD]), lm([SKY]))
    assert merged.labels[0, 0] == INVALID
    assert d.resolution == DISCUSSION and d.override is None


def test_truth_table_matches_reference():
    ids = [ROAD, BUILDING, SKY, INVALID]
    combos = list(itertools.product(ids, ids, ids + [None]))
    a = lm([x for x, _, _ in combos])
    b = lm([y for _, y, _ in combos])
    overrides = {i: o for i, (_, _, o) in enumerate(combos) if o is not None}
    merged, decisions = merge_annotations(a, b, overrides)
    logged = {d.pixel: d for d in decisions}
    for i, (x, y, o) in enumerate(combos):
        final, res = reference_rule(x, y, o)
        assert merged.labels[0, i] == final, (x, y, o)
        assert final in {x, y, o, INVALID}
        if i in logged:
            assert logged[i].resolution == res, (x, y, o)
            assert logged[i].final_label == final
        else:
            assert x == y and o is None and res == AGREE


def test_xy_overrides_and_ordering():
    a = LabelMap(np.array([[0, 1], [2, 0]], np.uint8), 3)
    b = LabelMap(np.array([[1, 1], [0, 0]], np.uint8), 3)
    merged, decisions = merge_annotations(a, b, {(0, 1): 0, (0, 0): 1})
    assert [d.pixel for d in decisions] == [0, 2]
    assert merged.labels.tolist() == [[1, 1], [0, 0]]


def test_symmetric_without_overrides(rng):
    for _ in range(20):
        x = rng.integers(0, 4, (5, 6)).astype(np.uint8)
        y = rng.integers(0, 4, (5, 6)).astype(np.uint8)
        x[x == 3] = INVALID
        y[y == 3] = INVALID
        ab, da = merge_annotations(LabelMap(x, 3), LabelMap(y, 3))
        ba, db = merge_annotations(LabelMap(y, 3), LabelMap(x, 3))
        assert ab == ba
        assert [d.pixel for d in da] == [d.pixel for d in db]


def test_merge_errors():
    with pytest.raises(ShapeError):
        merge_annotations(lm([0, 1]), lm([0]))
    with pytest.raises(ShapeError):
        merge_annotations(lm([0], 3), lm([0], 4))
    with pytest.raises(ShapeError):
        merge_annotations(lm([0]), lm([0]), {5: 0})
    with pytest.raises(LabelFormatError):
        merge_annotations(lm([0]), lm([0]), {0: 7})


def test_stats_identical_maps():
    m = lm([0, 1, 2, 1])
    st = disagreement_stats(m, m, m)
    assert st.differing_pixels == 0
    assert st.corrected_among_differing == 0.0
    assert all(v == 0.0 for v in st.per_class_error.values())


def test_stats_half_corrected():
    a, b = lm([0, 1, 2, 2]), lm([0, 2, 1, 2])
    final = lm([0, 2, INVALID, 2])
    st = disagreement_stats(a, b, final)
    assert (st.total_pixels, st.differing_pixels) == (4, 2)
    assert st.corrected_among_differing == 0.5


def test_stats_per_class_matches_counting():
    a = LabelMap(np.array([[0, 1], [2, 2]], np.uint8), 3)
    b = LabelMap(np.array([[0, 2], [2, 0]], np.uint8), 3)
    final = LabelMap(np.array([[0, 1], [2, 0]], np.uint8), 3)
    st = disagreement_stats(a, b, final)
    fa, fb, ff = (m.labels.ravel().tolist() for m in (a, b, final))
    for c in range(3):
        n = sum(1 for f in ff if f == c)
        errs = sum(1 for x, y, f in zip(fa, fb, ff) if f == c for lab in (x, y) if lab != c)
        assert st.per_class_error[c] == errs / (2 * n)
    assert st.per_class_error == {0: 0.25, 1: 0.5, 2: 0.0}


def test_stats_add_pools_counts():
    a, b, f = lm([0, 1]), lm([1, 1]), lm([1, 1])
    s = disagreement_stats(a, b, f) + disagreement_stats(a, b, f)
    assert (s.total_pixels, s.differing_pixels, s.corrected_pixels) == (4, 2, 2)
    assert s.to_dict()["differing_ratio"] == 0.5


def test_stats_shape_mismatch():
    with pytest.raises(ShapeError):
        disagreement_stats(lm([0, 1]), lm([0, 1]), lm([0]))
