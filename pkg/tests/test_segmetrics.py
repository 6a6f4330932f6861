import numpy as np
import pytest

from bloombench.errors import DimensionMismatch, EmptyInput
from bloombench.mask import Mask
from bloombench.segmetrics import (
    MaskPair,
    ciou,
    ciou_stderr,
    giou,
    giou_bootstrap_sd,
    image_iou,
    seg_report,
)

# --- pure-Python pixel-counting oracle -----------------------------------------


def oracle_counts(pred: Mask, truth: Mask):
    inter = union = 0
    for a, b in zip(pred.bits.ravel().tolist(), truth.bits.ravel().tolist()):
        if a and b:
            inter += 1
        if a or b:
            union += 1
    return inter, union


def oracle_iou(pred: Mask, truth: Mask) -> float:
    inter, union = oracle_counts(pred, truth)
    return 1.0 if union == 0 else inter / union


def oracle_ciou(pairs) -> float:
    total = 0.0
    for p in sorted(pairs, key=lambda p: p.scene_id):
        total += oracle_iou(p.pred, p.truth)
    return total / len(pairs)


def oracle_giou(pairs) -> float:
    inter = union = 0
    for p in pairs:
        i, u = oracle_counts(p.pred, p.truth)
        inter += i
        union += u
    return 1.0 if union == 0 else inter / union


def from_rows(rows) -> Mask:
    bits = np.array(rows, dtype=bool)
    return Mask(bits.shape[1], bits.shape[0], bits)


def random_pair(rng, scene_id) -> MaskPair:
    w = int(rng.integers(1, 17))
    h = int(rng.integers(1, 17))
    density_p = rng.uniform(0, 1)
    density_t = rng.uniform(0, 1)
    return MaskPair(
        scene_id,
        Mask(w, h, rng.random((h, w)) < density_p),
        Mask(w, h, rng.random((h, w)) < density_t),
    )


# --- image_iou -------------------------------------------------------------------


def test_iou_identity_nonempty():
    m = from_rows([[1, 1], [0, 1]])
    assert image_iou(m, m) == 1.0


def test_iou_both_empty_is_one():
    assert image_iou(Mask.zeros(4, 4), Mask.zeros(4, 4)) == 1.0


def test_iou_one_empty_is_zero():
    m = from_rows([[1, 0], [0, 0]])
    assert image_iou(m, Mask.zeros(2, 2)) == 0.0
    assert image_iou(Mask.zeros(2, 2), m) == 0.0


def test_iou_two_of_four_with_false_positive():
    truth = from_rows([[1, 1, 1, 1], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    pred = from_rows([[1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 1, 0]])
    assert image_iou(pred, truth) == pytest.approx(0.4)
    assert image_iou(pred, truth) == oracle_iou(pred, truth)


def test_iou_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        image_iou(Mask.zeros(2, 2), Mask.zeros(3, 2))
    with pytest.raises(DimensionMismatch):
        MaskPair("x", Mask.zeros(2, 2), Mask.zeros(2, 3))


def test_iou_symmetric_and_exact_iff_equal():
    rng = np.random.default_rng(17)
    for _ in range(50):
        p = random_pair(rng, "s")
        assert image_iou(p.pred, p.truth) == image_iou(p.truth, p.pred)
        if image_iou(p.pred, p.truth) == 1.0:
            assert p.pred == p.truth


# --- ciou / giou -----------------------------------------------------------------


def test_ciou_examples():
    a = MaskPair("a", from_rows([[1]]), from_rows([[1]]))
    b = MaskPair("b", from_rows([[1]]), from_rows([[0]]))
    assert ciou([a]) == image_iou(a.pred, a.truth) == 1.0
    assert ciou([a, b]) == pytest.approx(0.5)


def test_ciou_three_pairs_point_eight():
    truth = from_rows([[1, 1, 1, 1], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    pred = from_rows([[1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 1, 0]])
    same = from_rows([[1, 1], [1, 1]])
    pairs = [
        MaskPair("p04", pred, truth),
        MaskPair("p10a", same, same),
        MaskPair("p10b", same, same),
    ]
    assert ciou(pairs) == pytest.approx(0.8)


def test_giou_examples():
    # pair A: inter 2, union 5; pair B: inter 10, union 10 -> 12/15
    a_truth = from_rows([[1, 1, 1, 1], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    a_pred = from_rows([[1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 1, 0]])
    b = from_rows([[1] * 5, [1] * 5])
    pairs = [MaskPair("a", a_pred, a_truth), MaskPair("b", b, b)]
    assert giou(pairs) == pytest.approx(12 / 15)
    assert giou(pairs) == oracle_giou(pairs)


def test_giou_single_pair_equals_image_iou():
    rng = np.random.default_rng(29)
    p = random_pair(rng, "only")
    if image_iou(p.pred, p.truth) not in (0.0, 1.0):
        assert giou([p]) == image_iou(p.pred, p.truth) == ciou([p])


def test_giou_all_empty_is_one():
    pairs = [MaskPair(f"e{i}", Mask.zeros(3, 3), Mask.zeros(3, 3)) for i in range(3)]
    assert giou(pairs) == 1.0
    assert ciou(pairs) == 1.0


def test_empty_input_errors():
    with pytest.raises(EmptyInput):
        ciou([])
    with pytest.raises(EmptyInput):
        giou([])
    with pytest.raises(EmptyInput):
        seg_report([])


def test_metrics_match_oracle_randomized():
    rng = np.random.default_rng(37)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        pairs = [random_pair(rng, f"s{i:02d}") for i in range(n)]
        assert ciou(pairs) == oracle_ciou(pairs)
        assert giou(pairs) == oracle_giou(pairs)


def test_duplicating_below_average_pair_never_raises_giou():
    rng = np.random.default_rng(43)
    tested = 0
    for _ in range(200):
        n = int(rng.integers(1, 6))
        pairs = [random_pair(rng, f"s{i:02d}") for i in range(n)]
        g = giou(pairs)
        for p in pairs:
            if oracle_iou(p.pred, p.truth) < g:
                dup = pairs + [MaskPair(p.scene_id + "_dup", p.pred, p.truth)]
                assert giou(dup) <= g + 1e-15
                assert giou(dup) == oracle_giou(dup)
                tested += 1
    assert tested > 20


def test_seg_report_structure():
    a = MaskPair("b_scene", from_rows([[1, 0]]), from_rows([[1, 1]]))
    b = MaskPair("a_scene", from_rows([[1, 1]]), from_rows([[1, 1]]))
    report = seg_report([a, b])
    assert [sid for sid, _ in report.per_image] == ["a_scene", "b_scene"]
    assert report.ciou == pytest.approx(
        sum(v for _, v in report.per_image) / report.n_images
    )
    assert report.n_images == 2
    assert report.ciou_stderr >= 0.0
    assert report.giou_bootstrap_sd >= 0.0


def test_uncertainty_degenerate_cases():
    assert ciou_stderr([0.5]) == 0.0
    single = [MaskPair("x", from_rows([[1]]), from_rows([[1]]))]
    assert giou_bootstrap_sd(single) == 0.0


def test_bootstrap_deterministic():
    rng = np.random.default_rng(51)
    pairs = [random_pair(rng, f"s{i}") for i in range(4)]
    assert giou_bootstrap_sd(pairs) == giou_bootstrap_sd(pairs)
